#pragma once

#include <mphp/error.hpp>
#include <mphp/events.hpp>
#include <mphp/params.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mphp {

// Log-densities of data that the model cannot produce. Always -inf, never a
// large finite negative number.
inline constexpr double kImpossible = -std::numeric_limits<double>::infinity();

[[nodiscard]] inline bool is_impossible(double log_value) noexcept {
    return std::isinf(log_value) && log_value < 0.0;
}

// How the compensator (integrated intensity) is evaluated.
struct CompensatorOptions {
    // Replace the kernel tail mass G(T - t_j) = 1 - exp(-omega (T - t_j)) by 1.
    bool unit_tail{false};
    // Use T/D for every day-bucket length instead of the exact partial-week lengths.
    bool whole_week_approx{false};
};

[[nodiscard]] inline std::vector<double> bucket_lengths(double horizon, std::size_t num_days,
                                                        const CompensatorOptions& opts) {
    if (opts.whole_week_approx) {
        return std::vector<double>(num_days, horizon / static_cast<double>(num_days));
    }
    return bucket_exposure(0.0, horizon, num_days);
}

// Kernel density g(dt) = omega exp(-omega dt) and its integral G.
[[nodiscard]] inline double kernel_density(double omega, double dt) {
    return omega * std::exp(-omega * dt);
}
[[nodiscard]] inline double kernel_mass(double omega, double dt) {
    return -std::expm1(-omega * dt);
}

[[nodiscard]] inline double background_rate(const MphpParams& params, std::size_t type, double t) {
    return params.mu[type] * params.delta[day_index(t, params.num_days())];
}

// Conditional intensity of `type` at t given the events of `history` strictly
// before t.
[[nodiscard]] inline double intensity(const MphpParams& params, const EventSequence& history,
                                      double t, std::size_t type) {
    double rate = background_rate(params, type, t);
    for (const auto& e : history) {
        if (e.t >= t) {
            break;
        }
        rate += params.alpha(e.type, type) * kernel_density(params.omega, t - e.t);
    }
    return rate;
}

// Expected branching matrix P = E[Q]. Row i holds the probability that event i
// is a background event and the probabilities of each candidate parent j < i.
// Parents whose contribution is negligible may be omitted; they are zero.
class BranchingEstimate {
public:
    BranchingEstimate() { row_start_.push_back(0); }

    void add_row(double background, std::span<const std::size_t> parents,
                 std::span<const double> probabilities) {
        background_.push_back(background);
        parents_.insert(parents_.end(), parents.begin(), parents.end());
        probabilities_.insert(probabilities_.end(), probabilities.begin(), probabilities.end());
        row_start_.push_back(parents_.size());
    }

    [[nodiscard]] std::size_t size() const noexcept { return background_.size(); }
    [[nodiscard]] double background(std::size_t i) const { return background_[i]; }
    // Candidate parents of row i in increasing index order.
    [[nodiscard]] std::span<const std::size_t> parents(std::size_t i) const {
        return std::span<const std::size_t>(parents_).subspan(row_start_[i], row_start_[i + 1] - row_start_[i]);
    }
    [[nodiscard]] std::span<const double> probabilities(std::size_t i) const {
        return std::span<const double>(probabilities_).subspan(row_start_[i], row_start_[i + 1] - row_start_[i]);
    }

    // p_ij; the diagonal is the background probability, j > i is zero.
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        if (j == i) {
            return background_[i];
        }
        if (j > i) {
            return 0.0;
        }
        const auto ps = parents(i);
        const auto it = std::lower_bound(ps.begin(), ps.end(), j);
        if (it == ps.end() || *it != j) {
            return 0.0;
        }
        return probabilities(i)[static_cast<std::size_t>(it - ps.begin())];
    }

    // Most probable parent of event i, or i itself when background wins.
    [[nodiscard]] std::size_t likeliest_parent(std::size_t i) const {
        std::size_t best = i;
        double best_p = background_[i];
        const auto ps = parents(i);
        const auto pr = probabilities(i);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            if (pr[k] > best_p) {
                best_p = pr[k];
                best = ps[k];
            }
        }
        return best;
    }

    [[nodiscard]] std::size_t num_entries() const noexcept { return parents_.size(); }

private:
    std::vector<double> background_;
    std::vector<std::size_t> row_start_;
    std::vector<std::size_t> parents_;
    std::vector<double> probabilities_;
};

namespace detail {

inline void check_dimensions(const MphpParams& params, const EventSequence& seq) {
    params.validate();
    if (seq.num_types() != params.num_types()) {
        throw InputError("sequence and parameters disagree on the number of types");
    }
}

// Sum over types of the integrated intensity on [0, T].
inline double compensator(const MphpParams& params, const EventSequence& seq,
                          const CompensatorOptions& opts) {
    const auto lengths = bucket_lengths(seq.horizon(), params.num_days(), opts);
    double day_weight = 0.0;
    for (std::size_t d = 0; d < lengths.size(); ++d) {
        day_weight += params.delta[d] * lengths[d];
    }
    double total = 0.0;
    for (double m : params.mu) {
        total += m * day_weight;
    }
    const std::size_t u = params.num_types();
    std::vector<double> out_degree(u, 0.0);
    for (std::size_t p = 0; p < u; ++p) {
        for (double a : params.excitation.row(p)) {
            out_degree[p] += a;
        }
    }
    for (const auto& e : seq) {
        const double tail = opts.unit_tail ? 1.0 : kernel_mass(params.omega, seq.horizon() - e.t);
        total += out_degree[e.type] * tail;
    }
    return total;
}

// x log(y / x) with the 0 log(0/0) = 0 convention; y == 0 < x is impossible.
inline double weighted_log_ratio(double x, double log_y) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (is_impossible(log_y)) {
        return kImpossible;
    }
    return x * (log_y - std::log(x));
}

inline double safe_log(double v) { return v > 0.0 ? std::log(v) : kImpossible; }

} // namespace detail

// Point-process log-likelihood. Event i's history is every event j < i, so
// same-time events excite in index order.
[[nodiscard]] inline double observed_log_likelihood(const MphpParams& params, const EventSequence& seq,
                                                    const CompensatorOptions& opts = {}) {
    detail::check_dimensions(params, seq);
    const std::size_t u = params.num_types();
    std::vector<double> excitation(u, 0.0);
    double sum_log = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& e = seq[i];
        if (i > 0) {
            const auto& prev = seq[i - 1];
            const double decay = std::exp(-params.omega * (e.t - prev.t));
            for (std::size_t v = 0; v < u; ++v) {
                excitation[v] = decay * (excitation[v] + params.alpha(prev.type, v) * params.omega);
            }
        }
        const double rate = background_rate(params, e.type, e.t) + excitation[e.type];
        if (!(rate > 0.0)) {
            return kImpossible;
        }
        sum_log += std::log(rate);
    }
    return sum_log - detail::compensator(params, seq, opts);
}

// Expected complete-data log-likelihood under branching estimate P, including
// the -p log p terms (so it equals the observed log-likelihood when P is the
// exact posterior over parents).
[[nodiscard]] inline double complete_data_log_likelihood(const MphpParams& params,
                                                         const EventSequence& seq,
                                                         const BranchingEstimate& branching,
                                                         const CompensatorOptions& opts = {}) {
    detail::check_dimensions(params, seq);
    if (branching.size() != seq.size()) {
        throw InputError("branching estimate and sequence differ in length");
    }
    const double log_omega = std::log(params.omega);
    double total = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& child = seq[i];
        total += detail::weighted_log_ratio(branching.background(i),
                                            detail::safe_log(background_rate(params, child.type, child.t)));
        const auto ps = branching.parents(i);
        const auto pr = branching.probabilities(i);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            const auto& parent = seq[ps[k]];
            const double a = params.alpha(parent.type, child.type);
            const double log_y = a > 0.0 ? std::log(a) + log_omega - params.omega * (child.t - parent.t)
                                         : kImpossible;
            total += detail::weighted_log_ratio(pr[k], log_y);
        }
        if (is_impossible(total)) {
            return kImpossible;
        }
    }
    return total - detail::compensator(params, seq, opts);
}

// Log of the Gamma prior kernels, (s - 1) log x - r x, summed over A and delta.
[[nodiscard]] inline double log_prior(const MphpParams& params, const GammaPriors& priors) {
    priors.validate(params.num_types(), params.num_days());
    auto term = [](double x, double shape, double rate) {
        if (shape == 1.0) {
            return -rate * x;
        }
        return x > 0.0 ? (shape - 1.0) * std::log(x) - rate * x : kImpossible;
    };
    double total = 0.0;
    const std::size_t u = params.num_types();
    for (std::size_t p = 0; p < u; ++p) {
        for (std::size_t c = 0; c < u; ++c) {
            total += term(params.alpha(p, c), priors.shape_a(p, c), priors.rate_a(p, c));
        }
    }
    for (std::size_t d = 0; d < params.num_days(); ++d) {
        total += term(params.delta[d], priors.shape_delta[d], priors.rate_delta[d]);
    }
    return total;
}

// Complete-data log-posterior, up to a constant independent of the parameters.
[[nodiscard]] inline double log_posterior(const MphpParams& params, const EventSequence& seq,
                                          const BranchingEstimate& branching, const GammaPriors& priors,
                                          const CompensatorOptions& opts = {}) {
    const double prior = log_prior(params, priors);
    const double likelihood = complete_data_log_likelihood(params, seq, branching, opts);
    if (is_impossible(prior) || is_impossible(likelihood)) {
        return kImpossible;
    }
    return likelihood + prior;
}

} // namespace mphp
