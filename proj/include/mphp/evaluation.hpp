#pragma once

#include <mphp/baseline.hpp>
#include <mphp/error.hpp>
#include <mphp/estimation.hpp>
#include <mphp/events.hpp>
#include <mphp/params.hpp>
#include <mphp/random.hpp>
#include <mphp/simulation.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace mphp {

// Right-continuous step CDF of a finite sample.
class EmpiricalCdf {
public:
    explicit EmpiricalCdf(std::vector<double> sample) : sorted_(std::move(sample)) {
        if (sorted_.empty()) {
            throw InputError("empirical CDF needs at least one value");
        }
        std::sort(sorted_.begin(), sorted_.end());
    }

    [[nodiscard]] double operator()(double x) const {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    [[nodiscard]] std::span<const double> sample() const noexcept { return sorted_; }
    [[nodiscard]] std::size_t size() const noexcept { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

// Gaps between consecutive events, pooled over types; with `type` set, gaps
// between consecutive events of that type only.
[[nodiscard]] inline std::vector<double> interevent_gaps(const EventSequence& seq,
                                                         std::optional<std::size_t> type = std::nullopt) {
    std::vector<double> gaps;
    std::optional<double> previous;
    for (const auto& e : seq) {
        if (type && e.type != *type) {
            continue;
        }
        if (previous) {
            gaps.push_back(e.t - *previous);
        }
        previous = e.t;
    }
    return gaps;
}

[[nodiscard]] inline EmpiricalCdf interevent_cdf(const EventSequence& seq,
                                                 std::optional<std::size_t> type = std::nullopt) {
    auto gaps = interevent_gaps(seq, type);
    if (gaps.empty()) {
        throw InputError("inter-event CDF needs at least two events");
    }
    return EmpiricalCdf(std::move(gaps));
}

// Integral of |F - G| over the real line, exact for step functions.
[[nodiscard]] inline double area_statistic(const EmpiricalCdf& f, const EmpiricalCdf& g) {
    std::vector<double> grid;
    grid.reserve(f.size() + g.size());
    std::merge(f.sample().begin(), f.sample().end(), g.sample().begin(), g.sample().end(),
               std::back_inserter(grid));
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        area += std::abs(f(grid[k]) - g(grid[k])) * (grid[k + 1] - grid[k]);
    }
    return area;
}

// Same-day co-occurrence counts: entry (a, b), a != b, is the number of
// calendar days with at least one event of each type; (a, a) counts days with
// two or more type-a events.
[[nodiscard]] inline SquareMatrix same_day_cooccurrence(const EventSequence& seq) {
    const std::size_t u = seq.num_types();
    SquareMatrix counts(u);
    std::vector<std::size_t> per_type(u, 0);
    auto flush = [&] {
        for (std::size_t a = 0; a < u; ++a) {
            for (std::size_t b = 0; b < u; ++b) {
                if (a == b ? per_type[a] >= 2 : per_type[a] > 0 && per_type[b] > 0) {
                    counts(a, b) += 1.0;
                }
            }
        }
        std::fill(per_type.begin(), per_type.end(), 0);
    };
    std::optional<double> current_day;
    for (const auto& e : seq) {
        const double day = std::floor(e.t);
        if (current_day && day != *current_day) {
            flush();
        }
        current_day = day;
        ++per_type[e.type];
    }
    if (current_day) {
        flush();
    }
    return counts;
}

enum class GroupComparison {
    rank_sum,           // one-sided Mann-Whitney
    mean_permutation,   // difference of means, permutation p-value
};

struct GofOptions {
    GroupComparison comparison{GroupComparison::rank_sum};
    std::size_t permutations{9999};
};

struct GofResult {
    std::vector<double> model_areas;   // data vs model simulations, {A_m}
    std::vector<double> null_areas;    // model vs refitted-model simulations, {A0_m}
    double p_value{1.0};
    bool rejected_at_5pct{false};
    std::size_t replicates{0};
};

namespace detail {

// P(U >= u_obs) for the Mann-Whitney U of group x (size m) against y (size n)
// without ties, from the exact null distribution.
inline double mann_whitney_exact_upper(std::size_t m, std::size_t n, double u_obs) {
    // counts[j][u]: arrangements of i x's and j y's with statistic u, rolled over i.
    const std::size_t max_u = m * n;
    std::vector<std::vector<double>> prev(n + 1, std::vector<double>(max_u + 1, 0.0));
    for (std::size_t j = 0; j <= n; ++j) {
        prev[j][0] = 1.0;   // i = 0
    }
    for (std::size_t i = 1; i <= m; ++i) {
        std::vector<std::vector<double>> cur(n + 1, std::vector<double>(max_u + 1, 0.0));
        cur[0][0] = 1.0;
        for (std::size_t j = 1; j <= n; ++j) {
            for (std::size_t u = 0; u <= i * j; ++u) {
                // Largest element is an x (beats all j y's) or a y.
                cur[j][u] = (u >= j ? prev[j][u - j] : 0.0) + cur[j - 1][u];
            }
        }
        prev = std::move(cur);
    }
    double total = 0.0;
    double upper = 0.0;
    for (std::size_t u = 0; u <= max_u; ++u) {
        total += prev[n][u];
        if (static_cast<double>(u) >= u_obs - 1e-9) {
            upper += prev[n][u];
        }
    }
    return upper / total;
}

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

} // namespace detail

// One-sided rank-sum p-value for "x is stochastically larger than y".
[[nodiscard]] inline double rank_sum_p_value(std::span<const double> x, std::span<const double> y) {
    const std::size_t m = x.size();
    const std::size_t n = y.size();
    if (m == 0 || n == 0) {
        throw InputError("rank-sum test needs two non-empty groups");
    }
    std::vector<std::pair<double, int>> pooled;
    for (double v : x) pooled.emplace_back(v, 0);
    for (double v : y) pooled.emplace_back(v, 1);
    std::sort(pooled.begin(), pooled.end());
    const double total = static_cast<double>(m + n);
    double rank_sum_x = 0.0;
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t a = 0; a < pooled.size();) {
        std::size_t b = a;
        while (b < pooled.size() && pooled[b].first == pooled[a].first) {
            ++b;
        }
        const double mid_rank = 0.5 * static_cast<double>(a + 1 + b);
        const double run = static_cast<double>(b - a);
        if (b - a > 1) {
            ties = true;
            tie_term += run * run * run - run;
        }
        for (std::size_t k = a; k < b; ++k) {
            if (pooled[k].second == 0) {
                rank_sum_x += mid_rank;
            }
        }
        a = b;
    }
    const double u_stat = rank_sum_x - static_cast<double>(m) * static_cast<double>(m + 1) / 2.0;
    if (!ties && m <= 50 && n <= 50) {
        return detail::mann_whitney_exact_upper(m, n, u_stat);
    }
    const double mean = static_cast<double>(m) * static_cast<double>(n) / 2.0;
    const double var = static_cast<double>(m) * static_cast<double>(n) / 12.0 *
                       ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if (!(var > 0.0)) {
        return 1.0;   // every value tied: no evidence either way
    }
    return detail::normal_upper_tail((u_stat - mean - 0.5) / std::sqrt(var));
}

// One-sided permutation p-value for mean(x) - mean(y).
[[nodiscard]] inline double mean_permutation_p_value(std::span<const double> x, std::span<const double> y,
                                                     std::size_t permutations, std::uint64_t seed) {
    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto diff = [&](const std::vector<double>& v) {
        const double sx = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(x.size()), 0.0);
        const double sy = std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(x.size()), v.end(), 0.0);
        return sx / static_cast<double>(x.size()) - sy / static_cast<double>(y.size());
    };
    const double observed = diff(pooled);
    Rng rng(seed);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        for (std::size_t k = pooled.size() - 1; k > 0; --k) {
            std::swap(pooled[k], pooled[rng.uniform_int(0, k)]);
        }
        if (diff(pooled) >= observed - 1e-12 * std::abs(observed)) {
            ++at_least;
        }
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
}

// Monte Carlo goodness of fit on inter-event-time distributions.
//   fitter:    EventSequence -> Model
//   simulator: (Model, horizon, seed) -> EventSequence
// Replicate m draws its two simulations from derive_seed(seed, 2m) and
// derive_seed(seed, 2m + 1).
template <typename Fitter, typename Simulator>
[[nodiscard]] GofResult mc_gof_test(const EventSequence& seq, Fitter&& fitter, Simulator&& simulator,
                                    std::size_t replicates, std::uint64_t seed, const GofOptions& opts = {}) {
    if (replicates < 20) {
        throw InputError("Monte Carlo test needs at least 20 replicates");
    }
    const EmpiricalCdf data_cdf = interevent_cdf(seq);
    const auto fitted = fitter(seq);
    GofResult result;
    result.replicates = replicates;
    for (std::size_t m = 0; m < replicates; ++m) {
        try {
            const EventSequence first = simulator(fitted, seq.horizon(), derive_seed(seed, 2 * m));
            const EmpiricalCdf first_cdf = interevent_cdf(first);
            result.model_areas.push_back(area_statistic(data_cdf, first_cdf));
            const auto refitted = fitter(first);
            const EventSequence second = simulator(refitted, seq.horizon(), derive_seed(seed, 2 * m + 1));
            result.null_areas.push_back(area_statistic(first_cdf, interevent_cdf(second)));
        } catch (const Error& e) {
            throw ReplicateError("replicate " + std::to_string(m) + " failed: " + e.what(), m);
        }
    }
    result.p_value = opts.comparison == GroupComparison::rank_sum
                         ? rank_sum_p_value(result.model_areas, result.null_areas)
                         : mean_permutation_p_value(result.model_areas, result.null_areas, opts.permutations,
                                                    derive_seed(seed, 0xfeedULL));
    result.rejected_at_5pct = result.p_value < 0.05;
    return result;
}

// Fitter/simulator pairs for mc_gof_test.
[[nodiscard]] inline auto mphp_fitter(EmConfig cfg = {}, std::size_t num_days = kDaysPerWeek) {
    return [cfg, num_days](const EventSequence& seq) {
        return fit_map_em(seq, GammaPriors::flat(seq.num_types(), num_days), cfg).params;
    };
}
[[nodiscard]] inline auto mphp_simulator() {
    return [](const MphpParams& params, double horizon, std::uint64_t seed) {
        return simulate(params, horizon, seed);
    };
}
[[nodiscard]] inline auto mpp_fitter(std::size_t num_days = kDaysPerWeek, CompensatorOptions opts = {}) {
    return [num_days, opts](const EventSequence& seq) { return fit_mpp(seq, num_days, opts); };
}
[[nodiscard]] inline auto mpp_simulator() {
    return [](const MppParams& params, double horizon, std::uint64_t seed) {
        return simulate_mpp(params, horizon, seed);
    };
}

// Fraction of simulated continuations on [t, t + epsilon] that contain at
// least one event of each type. Sample r uses derive_seed(seed, r).
[[nodiscard]] inline std::vector<double> predict_window_probabilities(const MphpParams& params,
                                                                      const EventSequence& history, double t,
                                                                      double epsilon, std::size_t samples,
                                                                      std::uint64_t seed) {
    if (!(epsilon > 0.0)) {
        throw InputError("prediction window must have positive length");
    }
    if (samples < 100) {
        throw InputError("prediction needs at least 100 samples");
    }
    const ContinuationSampler sampler(params, history, t, t + epsilon);
    const std::size_t u = params.num_types();
    std::vector<double> hits(u, 0.0);
    std::vector<bool> seen(u);
    for (std::size_t r = 0; r < samples; ++r) {
        std::fill(seen.begin(), seen.end(), false);
        for (const auto& e : sampler.sample(derive_seed(seed, r))) {
            seen[e.type] = true;
        }
        for (std::size_t v = 0; v < u; ++v) {
            hits[v] += seen[v] ? 1.0 : 0.0;
        }
    }
    for (auto& h : hits) {
        h /= static_cast<double>(samples);
    }
    return hits;
}

[[nodiscard]] inline double predict_window_probability(const MphpParams& params, const EventSequence& history,
                                                       double t, double epsilon, std::size_t type,
                                                       std::size_t samples, std::uint64_t seed) {
    if (type >= params.num_types()) {
        throw InputError("type out of range");
    }
    return predict_window_probabilities(params, history, t, epsilon, samples, seed)[type];
}

struct PredictionScore {
    std::size_t user{0};
    std::size_t type{0};
    std::string model;
    double score{0.0};   // predicted probability of >= 1 event in the window
    bool label{false};   // whether such an event happened
};

struct PrPoint {
    double threshold{0.0};
    double precision{1.0};
    double recall{0.0};
    std::size_t true_positives{0};
    std::size_t classified_positive{0};
};

struct PrCurve {
    std::vector<PrPoint> points;
    double average_precision{0.0};   // mean precision over the threshold grid
    std::size_t positives{0};
    std::size_t total{0};
};

// 0, 0.01, ..., 1.
[[nodiscard]] inline std::vector<double> default_thresholds() {
    std::vector<double> grid(101);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        grid[k] = static_cast<double>(k) / 100.0;
    }
    return grid;
}

// Scores >= threshold are classified positive. Precision with no positive
// classifications is defined as 1.
[[nodiscard]] inline PrCurve precision_recall(std::span<const PredictionScore> scores,
                                              std::span<const double> thresholds) {
    if (thresholds.empty() || !std::is_sorted(thresholds.begin(), thresholds.end())) {
        throw InputError("thresholds must be a non-empty ascending list");
    }
    PrCurve curve;
    curve.total = scores.size();
    for (const auto& s : scores) {
        curve.positives += s.label ? 1 : 0;
    }
    if (curve.positives == 0) {
        throw InputError("precision/recall needs at least one positive label");
    }
    double precision_sum = 0.0;
    for (double theta : thresholds) {
        PrPoint point;
        point.threshold = theta;
        for (const auto& s : scores) {
            if (s.score >= theta) {
                ++point.classified_positive;
                point.true_positives += s.label ? 1 : 0;
            }
        }
        point.precision = point.classified_positive == 0
                              ? 1.0
                              : static_cast<double>(point.true_positives) /
                                    static_cast<double>(point.classified_positive);
        point.recall = static_cast<double>(point.true_positives) / static_cast<double>(curve.positives);
        precision_sum += point.precision;
        curve.points.push_back(point);
    }
    curve.average_precision = precision_sum / static_cast<double>(thresholds.size());
    return curve;
}

// A forecaster for the benchmark: fit on the training prefix [0, t) and return
// P(>= 1 event of each type in [t, t + epsilon]).
struct PredictionModel {
    std::string name;
    std::function<std::vector<double>(const EventSequence& train, double t, double epsilon, std::uint64_t seed)>
        score;
};

[[nodiscard]] inline PredictionModel mphp_prediction_model(EmConfig cfg = {}, std::size_t samples = 1000,
                                                           std::size_t num_days = kDaysPerWeek) {
    return PredictionModel{
        "mphp", [cfg, samples, num_days](const EventSequence& train, double t, double epsilon, std::uint64_t seed) {
            const auto fit = fit_map_em(train, GammaPriors::flat(train.num_types(), num_days), cfg);
            return predict_window_probabilities(fit.params, train, t, epsilon, samples, seed);
        }};
}

[[nodiscard]] inline PredictionModel mpp_prediction_model(std::size_t num_days = kDaysPerWeek) {
    return PredictionModel{"mpp", [num_days](const EventSequence& train, double t, double epsilon, std::uint64_t) {
                               const auto fit = fit_mpp(train, num_days);
                               std::vector<double> out(train.num_types());
                               for (std::size_t v = 0; v < out.size(); ++v) {
                                   out[v] = window_event_probability(fit, t, t + epsilon, v);
                               }
                               return out;
                           }};
}

struct BenchmarkConfig {
    double epsilon{2.0};
    double holdout{0.10};
    std::size_t top_k{10};
    std::uint64_t seed{0};
    std::size_t workers{1};
    std::vector<double> thresholds = default_thresholds();
};

struct BenchmarkResult {
    std::vector<std::size_t> tracked_types;           // most common first
    std::vector<PredictionScore> scores;              // ordered by user, then model, then type
    std::map<std::string, std::map<std::size_t, PrCurve>> curves;   // model -> type -> curve
    std::vector<double> cutoffs;                      // t per user (NaN when skipped)
    std::size_t skipped_no_history{0};
    std::size_t skipped_fit_failures{0};
};

// The cutoff day for one user: uniform over the integer days in the last
// `holdout` fraction of [0, T], leaving room for the window where possible.
[[nodiscard]] inline double draw_cutoff(double horizon, double holdout, double epsilon, std::uint64_t seed) {
    const auto lo = static_cast<std::uint64_t>(std::ceil((1.0 - holdout) * horizon));
    const auto hi = std::max(lo, static_cast<std::uint64_t>(std::max(0.0, std::floor(horizon - epsilon))));
    Rng rng(seed);
    return static_cast<double>(rng.uniform_int(lo, hi));
}

// Next-window activity prediction over a population. User k uses the seed
// stream derive_seed(cfg.seed, k); per-user work may run on `workers` threads
// and is aggregated in user order, so results do not depend on scheduling.
[[nodiscard]] inline BenchmarkResult prediction_benchmark(std::span<const EventSequence> users,
                                                          std::span<const PredictionModel> models,
                                                          const BenchmarkConfig& cfg = {}) {
    if (!(cfg.holdout > 0.0) || !(cfg.holdout < 1.0)) {
        throw InputError("holdout fraction must lie in (0, 1)");
    }
    if (!(cfg.epsilon > 0.0)) {
        throw InputError("epsilon must be positive");
    }
    if (users.empty() || models.empty()) {
        throw InputError("benchmark needs at least one user and one model");
    }
    const std::size_t u = users.front().num_types();
    std::vector<std::size_t> totals(u, 0);
    for (const auto& user : users) {
        if (user.num_types() != u) {
            throw InputError("all users must share one type vocabulary");
        }
        const auto counts = user.counts_by_type();
        for (std::size_t v = 0; v < u; ++v) {
            totals[v] += counts[v];
        }
    }
    BenchmarkResult result;
    result.tracked_types.resize(u);
    std::iota(result.tracked_types.begin(), result.tracked_types.end(), std::size_t{0});
    std::stable_sort(result.tracked_types.begin(), result.tracked_types.end(),
                     [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });
    result.tracked_types.resize(std::min(cfg.top_k, u));

    enum class Outcome { scored, no_history, fit_failed };
    struct UserWork {
        Outcome outcome{Outcome::scored};
        double cutoff{0.0};
        std::vector<PredictionScore> scores;
    };
    std::vector<UserWork> work(users.size());

    auto run_user = [&](std::size_t k) {
        const auto& user = users[k];
        const std::uint64_t user_seed = derive_seed(cfg.seed, k);
        auto& out = work[k];
        out.cutoff = draw_cutoff(user.horizon(), cfg.holdout, cfg.epsilon, user_seed);
        const EventSequence train = user.truncated(out.cutoff);
        if (train.empty()) {
            out.outcome = Outcome::no_history;
            return;
        }
        std::vector<bool> label(u, false);
        for (const auto& e : user) {
            if (e.t >= out.cutoff && e.t <= out.cutoff + cfg.epsilon) {
                label[e.type] = true;
            }
        }
        try {
            for (const auto& model : models) {
                const auto probs = model.score(train, out.cutoff, cfg.epsilon, derive_seed(user_seed, 1));
                for (std::size_t type : result.tracked_types) {
                    out.scores.push_back(PredictionScore{k, type, model.name, probs[type], label[type]});
                }
            }
        } catch (const Error&) {
            out.outcome = Outcome::fit_failed;
            out.scores.clear();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, users.size()));
    if (workers == 1) {
        for (std::size_t k = 0; k < users.size(); ++k) {
            run_user(k);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < users.size(); k = next++) {
                    run_user(k);
                }
            });
        }
        for (auto& thread : pool) {
            thread.join();
        }
    }

    for (const auto& w : work) {
        switch (w.outcome) {
        case Outcome::no_history:
            ++result.skipped_no_history;
            result.cutoffs.push_back(std::nan(""));
            break;
        case Outcome::fit_failed:
            ++result.skipped_fit_failures;
            result.cutoffs.push_back(std::nan(""));
            break;
        case Outcome::scored:
            result.cutoffs.push_back(w.cutoff);
            result.scores.insert(result.scores.end(), w.scores.begin(), w.scores.end());
            break;
        }
    }
    for (const auto& model : models) {
        for (std::size_t type : result.tracked_types) {
            std::vector<PredictionScore> subset;
            for (const auto& s : result.scores) {
                if (s.model == model.name && s.type == type) {
                    subset.push_back(s);
                }
            }
            const bool any_positive =
                std::any_of(subset.begin(), subset.end(), [](const PredictionScore& s) { return s.label; });
            if (any_positive) {
                result.curves[model.name][type] = precision_recall(subset, cfg.thresholds);
            }
        }
    }
    return result;
}

} // namespace mphp
