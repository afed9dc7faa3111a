#pragma once

#include <mphp/error.hpp>
#include <mphp/events.hpp>
#include <mphp/model.hpp>
#include <mphp/params.hpp>
#include <mphp/simulation.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mphp {

// Multivariate periodic Poisson process: the periodic Hawkes model with the
// excitation matrix fixed at zero.
struct MppParams {
    std::vector<double> mu;
    std::vector<double> delta;

    [[nodiscard]] std::size_t num_types() const noexcept { return mu.size(); }
    [[nodiscard]] std::size_t num_days() const noexcept { return delta.size(); }

    [[nodiscard]] MphpParams as_hawkes(double omega = 1.0) const {
        return MphpParams{mu, delta, SquareMatrix(mu.size()), omega};
    }

    friend bool operator==(const MppParams&, const MppParams&) = default;
};

// Closed-form maximum-likelihood fit: delta_d proportional to m_d / L_d
// (m_d events and exposure L_d in bucket d), normalized to sum D, and
// mu_u = n_u / sum_d delta_d L_d. For whole weeks this is mu_u = n_u / T.
[[nodiscard]] inline MppParams fit_mpp(const EventSequence& seq, std::size_t num_days = kDaysPerWeek,
                                       const CompensatorOptions& opts = {}) {
    if (seq.empty()) {
        throw InputError("fit_mpp needs a non-empty sequence");
    }
    if (!(seq.horizon() > 0.0)) {
        throw InputError("fit_mpp needs a positive horizon");
    }
    const auto lengths = bucket_lengths(seq.horizon(), num_days, opts);
    std::vector<double> per_day(num_days, 0.0);
    for (const auto& e : seq) {
        per_day[day_index(e.t, num_days)] += 1.0;
    }
    std::vector<double> delta(num_days, 0.0);
    for (std::size_t d = 0; d < num_days; ++d) {
        if (lengths[d] > 0.0) {
            delta[d] = per_day[d] / lengths[d];
        } else if (per_day[d] > 0.0) {
            throw InputError("day bucket " + std::to_string(d) + " has events but no exposure");
        }
    }
    MppParams out;
    out.delta = normalize_delta(std::move(delta));
    double exposure = 0.0;
    for (std::size_t d = 0; d < num_days; ++d) {
        exposure += out.delta[d] * lengths[d];
    }
    out.mu.assign(seq.num_types(), 0.0);
    for (const auto& e : seq) {
        out.mu[e.type] += 1.0;
    }
    for (auto& m : out.mu) {
        m /= exposure;
    }
    return out;
}

[[nodiscard]] inline EventSequence simulate_mpp(const MppParams& params, double horizon, std::uint64_t seed) {
    return simulate(params.as_hawkes(), horizon, seed);
}

// P(at least one type-u event in [t_start, t_end]).
[[nodiscard]] inline double window_event_probability(const MppParams& params, double t_start, double t_end,
                                                     std::size_t type) {
    if (type >= params.num_types()) {
        throw InputError("type out of range");
    }
    const auto exposure = bucket_exposure(t_start, t_end, params.num_days());
    double mass = 0.0;
    for (std::size_t d = 0; d < exposure.size(); ++d) {
        mass += params.delta[d] * exposure[d];
    }
    return -std::expm1(-params.mu[type] * mass);
}

} // namespace mphp
