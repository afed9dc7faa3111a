#pragma once

#include <mphp/error.hpp>
#include <mphp/events.hpp>
#include <mphp/model.hpp>
#include <mphp/params.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mphp {

struct EmConfig {
    std::size_t max_iters{500};
    double tol{1e-6};           // relative change of the log-posterior
    double omega{1.0};          // fixed decay rate, not estimated
    bool use_unit_tail{true};   // G(T - t_j) ~= 1 in the alpha update
    bool whole_week_approx{false};

    [[nodiscard]] CompensatorOptions compensator() const {
        return CompensatorOptions{use_unit_tail, whole_week_approx};
    }

    void validate() const {
        if (max_iters < 1) {
            throw InputError("max_iters must be >= 1");
        }
        if (!(tol > 0.0)) {
            throw InputError("tol must be positive");
        }
        if (!(omega > 0.0) || !std::isfinite(omega)) {
            throw InputError("omega must be positive");
        }
    }
};

struct FitResult {
    MphpParams params;
    BranchingEstimate branching;   // E-step responsibilities at `params`
    std::vector<double> trace;     // log-posterior after each E-step
    bool converged{false};
    std::size_t iterations{0};     // number of M-steps taken
    std::size_t clipped{0};        // M-step numerators clipped at zero
};

namespace detail {

// Kernel terms with omega * dt beyond this are dropped from E-step rows when
// the dropped mass is provably below 1e-16 of the row total.
inline constexpr double kKernelCutoff = 80.0;

} // namespace detail

// Posterior parent probabilities for every event given the parameters.
[[nodiscard]] inline BranchingEstimate e_step(const MphpParams& params, const EventSequence& seq) {
    detail::check_dimensions(params, seq);
    if (seq.empty()) {
        throw InputError("e_step needs a non-empty sequence");
    }
    const std::size_t u = params.num_types();
    const double omega = params.omega;
    std::vector<double> max_into(u, 0.0);
    for (std::size_t p = 0; p < u; ++p) {
        for (std::size_t c = 0; c < u; ++c) {
            max_into[c] = std::max(max_into[c], params.alpha(p, c));
        }
    }

    BranchingEstimate out;
    std::vector<std::size_t> parents;
    std::vector<double> weights;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& child = seq[i];
        const double background = background_rate(params, child.type, child.t);
        parents.clear();
        weights.clear();
        double total = background;
        std::size_t j = i;
        while (j > 0 && omega * (child.t - seq[j - 1].t) <= detail::kKernelCutoff) {
            --j;
            const double w = params.alpha(seq[j].type, child.type) * kernel_density(omega, child.t - seq[j].t);
            if (w > 0.0) {
                parents.push_back(j);
                weights.push_back(w);
                total += w;
            }
        }
        // Events 0..j-1 were skipped; bound what they could add.
        const double dropped_bound =
            static_cast<double>(j) * max_into[child.type] * omega * std::exp(-detail::kKernelCutoff);
        if (j > 0 && dropped_bound > 1e-16 * total) {
            while (j > 0) {
                --j;
                const double w = params.alpha(seq[j].type, child.type) * kernel_density(omega, child.t - seq[j].t);
                if (w > 0.0) {
                    parents.push_back(j);
                    weights.push_back(w);
                    total += w;
                }
            }
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw EstimationError("event " + std::to_string(i) + " has zero intensity under the parameters", i);
        }
        std::reverse(parents.begin(), parents.end());
        std::reverse(weights.begin(), weights.end());
        for (auto& w : weights) {
            w /= total;
        }
        out.add_row(background / total, parents, weights);
    }
    return out;
}

// Closed-form maximizer of the expected complete-data log-posterior for fixed
// responsibilities. `clipped` counts numerators that went negative (shape < 1)
// and were set to zero.
[[nodiscard]] inline MphpParams m_step(const BranchingEstimate& branching, const EventSequence& seq,
                                       const GammaPriors& priors, const EmConfig& cfg,
                                       std::size_t* clipped = nullptr) {
    cfg.validate();
    const std::size_t u = seq.num_types();
    const std::size_t days = priors.shape_delta.size();
    const double horizon = seq.horizon();
    if (!(horizon > 0.0)) {
        throw InputError("m_step requires a positive horizon");
    }
    if (branching.size() != seq.size()) {
        throw InputError("branching estimate and sequence differ in length");
    }
    if (priors.shape_a.size() != u || priors.rate_a.size() != u || priors.rate_delta.size() != days || days == 0) {
        throw InputError("prior dimensions do not match the sequence");
    }
    std::size_t clip_count = 0;
    auto clip = [&clip_count](double v) {
        if (v < 0.0) {
            ++clip_count;
            return 0.0;
        }
        return v;
    };

    std::vector<double> background_by_type(u, 0.0);
    std::vector<double> background_by_day(days, 0.0);
    SquareMatrix child_mass(u);   // (parent type, child type)
    std::vector<double> parent_exposure(u, 0.0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& child = seq[i];
        background_by_type[child.type] += branching.background(i);
        background_by_day[day_index(child.t, days)] += branching.background(i);
        const auto ps = branching.parents(i);
        const auto pr = branching.probabilities(i);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            child_mass(seq[ps[k]].type, child.type) += pr[k];
        }
        parent_exposure[child.type] += cfg.use_unit_tail ? 1.0 : kernel_mass(cfg.omega, horizon - child.t);
    }

    MphpParams next;
    next.omega = cfg.omega;
    next.excitation = SquareMatrix(u);
    for (std::size_t p = 0; p < u; ++p) {
        for (std::size_t c = 0; c < u; ++c) {
            const double numerator = clip(child_mass(p, c) + priors.shape_a(p, c) - 1.0);
            const double denominator = parent_exposure[p] + priors.rate_a(p, c);
            if (denominator > 0.0) {
                next.excitation(p, c) = numerator / denominator;
            } else if (numerator > 0.0) {
                throw EstimationError("alpha(" + std::to_string(p) + "," + std::to_string(c) +
                                          ") has an unbounded posterior: no parent exposure and zero prior rate",
                                      p * u + c);
            }
        }
    }

    // Day profile and background rates are maximized jointly under
    // sum(delta) == D. With background count B and day pseudo-counts c_d the
    // stationarity conditions are
    //   c_d / delta_d = B L_d / S + lambda,  S = sum_d delta_d L_d,
    //   lambda = (sum_d c_d - B) / D,        mu_u = B_u / S.
    // Equal bucket lengths reduce this to delta_d = D c_d / sum(c).
    const auto lengths = bucket_lengths(horizon, days, cfg.compensator());
    std::vector<double> counts(days);
    double count_total = 0.0;
    double background_total = 0.0;
    for (std::size_t d = 0; d < days; ++d) {
        counts[d] = clip(background_by_day[d] + priors.shape_delta[d] - 1.0);
        count_total += counts[d];
        background_total += background_by_day[d];
    }
    if (!(count_total > 0.0) || !(background_total > 0.0)) {
        throw EstimationError("no background mass to estimate the day profile", 0);
    }
    const bool equal_lengths = std::all_of(lengths.begin(), lengths.end(),
                                           [&](double l) { return l == lengths.front(); });
    const double lambda = (count_total - background_total) / static_cast<double>(days);
    std::vector<double> delta(days, 0.0);
    if (equal_lengths) {
        delta = counts;
    } else if (lambda == 0.0) {
        // delta_d proportional to c_d / L_d; buckets without exposure carry no counts.
        for (std::size_t d = 0; d < days; ++d) {
            if (lengths[d] > 0.0) {
                delta[d] = counts[d] / lengths[d];
            } else if (counts[d] > 0.0) {
                throw EstimationError("day bucket " + std::to_string(d) + " has events but no exposure", d);
            }
        }
    } else {
        // sum_d delta_d(S) increases in S; solve sum == D by bisection. With
        // lambda < 0 the profile has a pole at the smallest B L_d / -lambda.
        for (std::size_t d = 0; d < days; ++d) {
            if (lengths[d] == 0.0 && counts[d] > 0.0) {
                throw EstimationError("day bucket " + std::to_string(d) + " has events but no exposure", d);
            }
        }
        auto profile_at = [&](double s) {
            double sum = 0.0;
            for (std::size_t d = 0; d < days; ++d) {
                delta[d] = counts[d] > 0.0 ? counts[d] / (background_total * lengths[d] / s + lambda) : 0.0;
                sum += delta[d];
            }
            return sum;
        };
        const double target = static_cast<double>(days);
        double lo = 0.0;
        double hi = horizon;
        if (lambda > 0.0) {
            while (profile_at(hi) < target) {
                hi *= 2.0;
            }
        } else {
            hi = std::numeric_limits<double>::infinity();
            for (std::size_t d = 0; d < days; ++d) {
                if (counts[d] > 0.0) {
                    hi = std::min(hi, background_total * lengths[d] / -lambda);
                }
            }
        }
        for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
            const double mid = 0.5 * (lo + hi);
            (profile_at(mid) < target ? lo : hi) = mid;
        }
        profile_at(lo);
    }
    next.delta = normalize_delta(std::move(delta));
    double exposure = 0.0;
    for (std::size_t d = 0; d < days; ++d) {
        exposure += next.delta[d] * lengths[d];
    }
    next.mu.assign(u, 0.0);
    for (std::size_t c = 0; c < u; ++c) {
        next.mu[c] = background_by_type[c] / exposure;
    }
    if (clipped != nullptr) {
        *clipped += clip_count;
    }
    return next;
}

// Data-driven starting point: mu_u = n_u / (2T), flat day profile, and
// alpha(p, c) = 0.1 wherever some type-p event precedes some type-c event.
[[nodiscard]] inline MphpParams default_initialization(const EventSequence& seq, std::size_t num_days,
                                                       double omega) {
    const std::size_t u = seq.num_types();
    MphpParams init = MphpParams::poisson(std::vector<double>(u, 0.0), num_days, omega);
    std::vector<bool> seen(u, false);
    for (const auto& e : seq) {
        init.mu[e.type] += 1.0 / (2.0 * seq.horizon());
        for (std::size_t p = 0; p < u; ++p) {
            if (seen[p]) {
                init.excitation(p, e.type) = 0.1;
            }
        }
        seen[e.type] = true;
    }
    return init;
}

// MAP expectation-maximization.
[[nodiscard]] inline FitResult fit_map_em(const EventSequence& seq, const GammaPriors& priors,
                                          const EmConfig& cfg = {},
                                          std::optional<MphpParams> init = std::nullopt) {
    cfg.validate();
    if (seq.size() < 2) {
        throw InputError("fit_map_em needs at least two events");
    }
    if (!(seq.horizon() > 0.0)) {
        throw InputError("fit_map_em needs a positive horizon");
    }
    const std::size_t days = priors.shape_delta.size();
    priors.validate(seq.num_types(), days);

    FitResult result;
    result.params = init ? std::move(*init) : default_initialization(seq, days, cfg.omega);
    result.params.omega = cfg.omega;
    detail::check_dimensions(result.params, seq);
    const auto opts = cfg.compensator();

    for (;;) {
        result.branching = e_step(result.params, seq);
        const double value = log_posterior(result.params, seq, result.branching, priors, opts);
        if (!std::isfinite(value)) {
            throw EstimationError("log-posterior is not finite at iteration " +
                                      std::to_string(result.iterations),
                                  result.iterations);
        }
        const bool settled = !result.trace.empty() &&
                             std::abs(value - result.trace.back()) <= cfg.tol * std::abs(result.trace.back());
        result.trace.push_back(value);
        if (settled) {
            result.converged = true;
            break;
        }
        if (result.iterations == cfg.max_iters) {
            break;
        }
        result.params = m_step(result.branching, seq, priors, cfg, &result.clipped);
        ++result.iterations;
    }
    return result;
}

// Fits once per candidate decay rate and keeps the fit with the highest
// observed log-likelihood.
[[nodiscard]] inline FitResult select_omega(const EventSequence& seq, const GammaPriors& priors,
                                            EmConfig cfg, std::span<const double> omegas) {
    if (omegas.empty()) {
        throw InputError("omega grid is empty");
    }
    std::optional<FitResult> best;
    double best_ll = kImpossible;
    for (double omega : omegas) {
        cfg.omega = omega;
        auto fit = fit_map_em(seq, priors, cfg);
        const double ll = observed_log_likelihood(fit.params, seq, cfg.compensator());
        if (!best || ll > best_ll) {
            best_ll = ll;
            best = std::move(fit);
        }
    }
    return std::move(*best);
}

} // namespace mphp
