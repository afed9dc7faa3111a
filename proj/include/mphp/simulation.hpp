#pragma once

#include <mphp/error.hpp>
#include <mphp/events.hpp>
#include <mphp/model.hpp>
#include <mphp/params.hpp>
#include <mphp/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mphp {

// Thinning state. `excitation[u]` is the right limit at `last_time` of the
// self/cross-excitation part of lambda_u, i.e. lambda_u(t+) - mu_u delta_d(t).
// It is always >= 0 and decays as exp(-omega (t - last_time)).
struct SimState {
    double last_time{0.0};
    std::vector<double> excitation;

    [[nodiscard]] static SimState quiet(std::size_t num_types, double at = 0.0) {
        return SimState{at, std::vector<double>(num_types, 0.0)};
    }

    // Excitation left at t by every event of `history` (all of them count as past).
    [[nodiscard]] static SimState from_history(const MphpParams& params, const EventSequence& history,
                                               double at) {
        SimState state = quiet(params.num_types(), at);
        for (const auto& e : history) {
            const double decay = params.omega * std::exp(-params.omega * (at - e.t));
            for (std::size_t v = 0; v < params.num_types(); ++v) {
                state.excitation[v] += params.alpha(e.type, v) * decay;
            }
        }
        return state;
    }

    // Intensities at t >= last_time in O(U).
    [[nodiscard]] std::vector<double> rates_at(const MphpParams& params, double t) const {
        if (t < last_time) {
            throw DomainError("rates requested before the last recorded event");
        }
        const double decay = std::exp(-params.omega * (t - last_time));
        const double day = params.delta[day_index(t, params.num_days())];
        std::vector<double> rates(excitation.size());
        for (std::size_t u = 0; u < rates.size(); ++u) {
            rates[u] = params.mu[u] * day + decay * excitation[u];
        }
        return rates;
    }
};

// lambda_u(t) for t >= t_k from the intensities recorded at the last event
// t_k (just before its own jump) and that event's type:
//   lambda_u(t) = mu_u delta_d(t) + exp(-omega (t - t_k)) (a(u_k, u) omega + lambda_u(t_k) - mu_u delta_d(t_k)).
[[nodiscard]] inline std::vector<double> rate_recursion(const MphpParams& params, double last_time,
                                                        std::optional<std::size_t> last_type,
                                                        const std::vector<double>& rates_at_last, double t) {
    if (rates_at_last.size() != params.num_types()) {
        throw InputError("rate vector length differs from the number of types");
    }
    SimState state = SimState::quiet(params.num_types(), last_time);
    const double day = params.delta[day_index(last_time, params.num_days())];
    for (std::size_t u = 0; u < params.num_types(); ++u) {
        const double jump = last_type ? params.alpha(*last_type, u) * params.omega : 0.0;
        state.excitation[u] = jump + std::max(0.0, rates_at_last[u] - params.mu[u] * day);
    }
    return state.rates_at(params, t);
}

namespace detail {

inline void require_stationary(const MphpParams& params) {
    params.validate();
    const double rho = spectral_radius(params.excitation);
    if (rho >= 1.0) {
        throw SimulationError("excitation matrix has spectral radius " + std::to_string(rho) +
                              " >= 1; refusing to simulate a nonstationary process");
    }
}

// Ogata thinning from `state` up to `t_end`, appending accepted events. The
// dominating rate is max(delta) sum(mu) + sum(excitation at the loop origin);
// excitation only decays until the next candidate, so the bound holds.
inline void thin(const MphpParams& params, SimState& state, double t_end, Rng& rng,
                 std::vector<Event>& out) {
    const std::size_t u = params.num_types();
    const double max_day = *std::max_element(params.delta.begin(), params.delta.end());
    const double base_bound = max_day * std::accumulate(params.mu.begin(), params.mu.end(), 0.0);
    std::vector<double> rates(u);
    for (;;) {
        const double bound = base_bound + std::accumulate(state.excitation.begin(), state.excitation.end(), 0.0);
        if (!(bound > 0.0)) {
            return;
        }
        const double candidate = state.last_time + rng.exponential(bound);
        if (candidate > t_end) {
            return;
        }
        const double decay = std::exp(-params.omega * (candidate - state.last_time));
        const double day = params.delta[day_index(candidate, params.num_days())];
        double total = 0.0;
        for (std::size_t v = 0; v < u; ++v) {
            state.excitation[v] *= decay;
            rates[v] = params.mu[v] * day + state.excitation[v];
            total += rates[v];
        }
        state.last_time = candidate;
        if (total > bound * (1.0 + 1e-12)) {
            throw SimulationError("thinning bound violated at t = " + std::to_string(candidate));
        }
        // Index u is the rejection outcome.
        const std::size_t pick = rng.weighted_index(rates, bound);
        if (pick == u) {
            continue;
        }
        out.push_back(Event{candidate, pick});
        for (std::size_t v = 0; v < u; ++v) {
            state.excitation[v] += params.alpha(pick, v) * params.omega;
        }
    }
}

} // namespace detail

// Exact sample of the process on [0, horizon].
[[nodiscard]] inline EventSequence simulate(const MphpParams& params, double horizon, std::uint64_t seed) {
    detail::require_stationary(params);
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw DomainError("simulation horizon must be positive");
    }
    Rng rng(seed);
    SimState state = SimState::quiet(params.num_types());
    std::vector<Event> events;
    detail::thin(params, state, horizon, rng, events);
    return EventSequence(std::move(events), horizon, params.num_types());
}

// Conditional sample on [t_start, t_end] given everything in `history`.
// Precomputes the history's excitation once; `sample` can then be called for
// many seeds.
class ContinuationSampler {
public:
    ContinuationSampler(MphpParams params, const EventSequence& history, double t_start, double t_end)
        : params_(std::move(params)), t_end_(t_end) {
        detail::require_stationary(params_);
        if (history.num_types() != params_.num_types()) {
            throw InputError("history and parameters disagree on the number of types");
        }
        if (!(t_start >= 0.0) || !(t_end >= t_start) || !std::isfinite(t_end)) {
            throw DomainError("continuation window must satisfy 0 <= t_start <= t_end");
        }
        if (!history.empty() && history.events().back().t > t_start) {
            throw DomainError("history extends past the start of the continuation window");
        }
        start_ = SimState::from_history(params_, history, t_start);
    }

    [[nodiscard]] const SimState& start_state() const noexcept { return start_; }

    [[nodiscard]] EventSequence sample(std::uint64_t seed) const {
        Rng rng(seed);
        SimState state = start_;
        std::vector<Event> events;
        detail::thin(params_, state, t_end_, rng, events);
        return EventSequence(std::move(events), t_end_, params_.num_types());
    }

private:
    MphpParams params_;
    double t_end_;
    SimState start_;
};

[[nodiscard]] inline EventSequence simulate_continuation(const MphpParams& params, const EventSequence& history,
                                                         double t_start, double t_end, std::uint64_t seed) {
    return ContinuationSampler(params, history, t_start, t_end).sample(seed);
}

} // namespace mphp
