#include "oracles.hpp"

#include <mphp/estimation.hpp>
#include <mphp/simulation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mphp;

namespace {

double row_sum(const BranchingEstimate& b, std::size_t i) {
    double total = b.background(i);
    for (double p : b.probabilities(i)) {
        total += p;
    }
    return total;
}

MphpParams perturbed(const MphpParams& p, std::mt19937_64& gen, double scale) {
    std::uniform_real_distribution<double> factor(1.0 - scale, 1.0 + scale);
    MphpParams q = p;
    for (auto& m : q.mu) {
        m *= factor(gen);
    }
    for (auto& d : q.delta) {
        d *= factor(gen);
    }
    q.delta = normalize_delta(q.delta);
    for (std::size_t i = 0; i < q.num_types(); ++i) {
        for (std::size_t j = 0; j < q.num_types(); ++j) {
            q.excitation(i, j) *= factor(gen);
        }
    }
    return q;
}

} // namespace

TEST(EStep, FirstEventIsBackground) {
    std::mt19937_64 gen(1);
    const auto p = oracle::random_params(gen, 2, 0.7);
    const auto seq = oracle::random_sequence(gen, 5, 10.0, 2);
    EXPECT_EQ(e_step(p, seq).background(0), 1.0);
}

TEST(EStep, TwoSameTypeEvents) {
    auto p = MphpParams::poisson({0.2});
    p.excitation(0, 0) = 0.5;
    const EventSequence seq({{0.5, 0}, {1.5, 0}}, 3.0, 1);
    const auto b = e_step(p, seq);
    const double z = 0.2 + 0.5 * std::exp(-1.0);
    EXPECT_NEAR(z, 0.38394, 5e-6);
    EXPECT_NEAR(b.background(1), 0.2 / z, 1e-15);
    EXPECT_NEAR(b(1, 0), 0.5 * std::exp(-1.0) / z, 1e-15);
    EXPECT_NEAR(b.background(1), 0.52092, 5e-6);
    EXPECT_NEAR(b(1, 0), 0.47908, 5e-6);
}

TEST(EStep, NoExcitationMeansAllBackground) {
    std::mt19937_64 gen(2);
    auto p = oracle::random_params(gen, 3, 0.0);
    const auto seq = oracle::random_sequence(gen, 40, 20.0, 3);
    const auto b = e_step(p, seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_EQ(b.background(i), 1.0);
    }
    EXPECT_EQ(b.num_entries(), 0u);
}

TEST(EStep, RowsAreStochastic) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = oracle::random_params(gen, 4, 0.9);
        const auto seq = oracle::random_sequence(gen, 60, 30.0, 4);
        const auto b = e_step(p, seq);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            EXPECT_NEAR(row_sum(b, i), 1.0, 1e-12);
            for (std::size_t parent : b.parents(i)) {
                EXPECT_LT(parent, i);
            }
        }
    }
}

TEST(EStep, MatchesEnumerationOverBranchings) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 40; ++trial) {
        auto p = oracle::random_params(gen, 2, 0.9);
        const std::size_t n = 1 + trial % 5;
        const auto seq = oracle::random_sequence(gen, n, 3.0, 2);
        const auto expected = oracle::enumerate_responsibilities(p, seq);
        const auto b = e_step(p, seq);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                EXPECT_NEAR(b(i, j), static_cast<double>(expected[i][j]), 1e-12);
            }
        }
    }
}

TEST(EStep, DistantParentsAreNegligible) {
    auto p = MphpParams::poisson({0.3, 0.3}, 7, 2.0);
    p.excitation = SquareMatrix::from_rows({{0.4, 0.1}, {0.2, 0.3}});
    std::vector<Event> events;
    for (int k = 0; k < 30; ++k) {
        events.push_back({k * 50.0 + 0.25, static_cast<std::size_t>(k % 2)});
        events.push_back({k * 50.0 + 0.75, static_cast<std::size_t>((k + 1) % 2)});
    }
    const EventSequence seq(events, 1500.0, 2);
    const auto b = e_step(p, seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        oracle::Real z = oracle::event_intensity(p, seq, i);
        const auto& e = seq[i];
        EXPECT_NEAR(b.background(i), static_cast<double>(p.mu[e.type] * p.delta[day_index(e.t, 7)] / z), 1e-15);
        EXPECT_NEAR(row_sum(b, i), 1.0, 1e-12);
    }
}

TEST(EStep, ImpossibleEventNamesIndex) {
    auto p = MphpParams::poisson({0.2, 0.0});
    const EventSequence seq({{0.5, 0}, {0.6, 0}, {0.7, 1}}, 1.0, 2);
    try {
        (void)e_step(p, seq);
        FAIL() << "expected EstimationError";
    } catch (const EstimationError& e) {
        EXPECT_EQ(e.index(), 2u);
    }
    EXPECT_THROW((void)e_step(p, EventSequence({}, 1.0, 2)), InputError);
}

TEST(MStep, BackgroundCountOverTime) {
    std::vector<Event> events;
    for (int day = 0; day < 5; ++day) {
        events.push_back({day + 0.2, 0});
        events.push_back({day + 0.7, 0});
    }
    const EventSequence seq(events, 5.0, 1);
    const auto b = e_step(MphpParams::poisson({1.0}), seq);
    EmConfig cfg;
    cfg.whole_week_approx = true;
    const auto approx = m_step(b, seq, GammaPriors::flat(1), cfg);
    EXPECT_NEAR(approx.mu[0], 2.0, 1e-12);

    // With exact bucket lengths the two unobserved weekend days get zero
    // weight, and the rate on observed days is still two per day.
    const auto exact = m_step(b, seq, GammaPriors::flat(1), EmConfig{});
    for (std::size_t d = 0; d < 5; ++d) {
        EXPECT_NEAR(exact.mu[0] * exact.delta[d], 2.0, 1e-12);
    }
    EXPECT_EQ(exact.delta[5], 0.0);
    EXPECT_EQ(exact.delta[6], 0.0);
}

TEST(MStep, SingleParentChildPair) {
    const EventSequence seq({{0.2, 1}, {0.4, 0}}, 7.0, 2);
    BranchingEstimate b;
    b.add_row(1.0, {}, {});
    const std::size_t parent[] = {0};
    const double half[] = {0.5};
    b.add_row(0.5, parent, half);
    const auto next = m_step(b, seq, GammaPriors::flat(2), EmConfig{});
    EXPECT_NEAR(next.alpha(1, 0), 0.5, 1e-15);
    EXPECT_EQ(next.alpha(0, 1), 0.0);
    EXPECT_EQ(next.alpha(0, 0), 0.0);
}

TEST(MStep, UniformDayCountsGiveFlatProfile) {
    std::vector<Event> events;
    for (int day = 0; day < 7; ++day) {
        for (int k = 0; k < 7; ++k) {
            events.push_back({day + 0.1 * (k + 1), 0});
        }
    }
    const EventSequence seq(events, 7.0, 1);
    BranchingEstimate b;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        b.add_row(1.0, {}, {});
    }
    const auto next = m_step(b, seq, GammaPriors::flat(1), EmConfig{});
    for (double d : next.delta) {
        EXPECT_NEAR(d, 1.0, 1e-12);
    }
    EXPECT_NEAR(next.mu[0], 7.0, 1e-12);
}

TEST(MStep, WholeWeeksReduceToCountRatios) {
    std::mt19937_64 gen(5);
    const auto p = oracle::random_params(gen, 2, 0.6);
    const auto seq = oracle::random_sequence(gen, 50, 28.0, 2);
    const auto b = e_step(p, seq);
    auto priors = GammaPriors::flat(2);
    priors.shape_delta = {1.5, 2, 1, 1, 3, 1, 1.2};
    const auto next = m_step(b, seq, priors, EmConfig{});
    std::vector<double> counts(7, 0.0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        counts[day_index(seq[i].t, 7)] += b.background(i);
    }
    double total = 0.0;
    for (std::size_t d = 0; d < 7; ++d) {
        counts[d] += priors.shape_delta[d] - 1.0;
        total += counts[d];
    }
    for (std::size_t d = 0; d < 7; ++d) {
        EXPECT_NEAR(next.delta[d], 7.0 * counts[d] / total, 1e-12);
    }
    double background_0 = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i].type == 0) {
            background_0 += b.background(i);
        }
    }
    EXPECT_NEAR(next.mu[0], background_0 / 28.0, 1e-12);
}

TEST(MStep, MaximizesExpectedLogPosterior) {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto truth = oracle::random_params(gen, 2, 0.7);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                truth.excitation(i, j) += 0.05;
            }
        }
        // Odd horizons exercise the unequal-bucket path.
        const double horizon = 10.0 + 7.0 * trial + unit(gen);
        const auto seq = oracle::random_sequence(gen, 30, horizon, 2);
        const auto b = e_step(truth, seq);
        auto priors = GammaPriors::flat(2);
        for (std::size_t d = 0; d < 7; ++d) {
            priors.shape_delta[d] = 1.0 + 2.0 * unit(gen);
        }
        priors.shape_a(0, 1) = 1.5;
        priors.rate_a(1, 1) = 2.0;
        EmConfig cfg;
        cfg.use_unit_tail = trial % 2 == 0;
        const auto best = m_step(b, seq, priors, cfg);
        const double at_best = log_posterior(best, seq, b, priors, cfg.compensator());
        for (int k = 0; k < 30; ++k) {
            const auto other = perturbed(best, gen, 0.05);
            EXPECT_LE(log_posterior(other, seq, b, priors, cfg.compensator()), at_best + 1e-9);
        }
    }
}

TEST(MStep, ClipsNegativeNumerators) {
    const EventSequence seq({{0.2, 0}, {1.4, 0}, {2.4, 0}}, 7.0, 1);
    BranchingEstimate b;
    for (int i = 0; i < 3; ++i) {
        b.add_row(1.0, {}, {});
    }
    auto priors = GammaPriors::flat(1);
    priors.shape_a(0, 0) = 0.5;
    priors.shape_delta = {1, 1, 1, 0.5, 0.5, 0.5, 0.5};
    std::size_t clipped = 0;
    const auto next = m_step(b, seq, priors, EmConfig{}, &clipped);
    EXPECT_EQ(clipped, 5u);
    EXPECT_EQ(next.alpha(0, 0), 0.0);
    for (std::size_t d = 3; d < 7; ++d) {
        EXPECT_EQ(next.delta[d], 0.0);
    }
    EXPECT_NO_THROW(next.validate());
}

TEST(MStep, UnboundedAlphaIsAnError) {
    const EventSequence seq({{0.2, 0}, {1.4, 0}}, 7.0, 2);
    BranchingEstimate b;
    b.add_row(1.0, {}, {});
    b.add_row(1.0, {}, {});
    auto priors = GammaPriors::flat(2);
    priors.shape_a(1, 0) = 2.0;   // type 1 never occurs, rate 0
    EXPECT_THROW((void)m_step(b, seq, priors, EmConfig{}), EstimationError);
}

TEST(MStep, ZeroHorizonIsAnError) {
    const EventSequence seq({{0.0, 0}}, 0.0, 1);
    BranchingEstimate b;
    b.add_row(1.0, {}, {});
    EXPECT_THROW((void)m_step(b, seq, GammaPriors::flat(1), EmConfig{}), InputError);
}

TEST(FitMapEm, TraceIsMonotone) {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t types = 1 + trial % 3;
        auto truth = oracle::random_params(gen, types, 0.6);
        const auto seq = simulate(truth, 150.0 + 13.3 * trial, 100 + trial);
        if (seq.size() < 2) {
            continue;
        }
        auto priors = GammaPriors::flat(types);
        if (trial % 2 == 1) {
            priors = GammaPriors::uniform(types, 7, 1.5, 0.5, 2.0, 0.1);
        }
        EmConfig cfg;
        cfg.use_unit_tail = trial % 4 < 2;
        cfg.tol = 1e-10;
        cfg.max_iters = 200;
        const auto fit = fit_map_em(seq, priors, cfg);
        for (std::size_t k = 1; k < fit.trace.size(); ++k) {
            EXPECT_GE(fit.trace[k], fit.trace[k - 1] - 1e-9) << "trial " << trial << " step " << k;
        }
        EXPECT_EQ(fit.trace.size(), fit.iterations + 1);
        EXPECT_EQ(fit.clipped, 0u);
    }
}

TEST(FitMapEm, FinalTraceEqualsObservedPosterior) {
    std::mt19937_64 gen(8);
    const auto truth = oracle::random_params(gen, 2, 0.5);
    const auto seq = simulate(truth, 200.0, 9);
    const auto priors = GammaPriors::uniform(2, 7, 1.2, 0.3, 1.5, 0.0);
    for (bool unit_tail : {true, false}) {
        EmConfig cfg;
        cfg.use_unit_tail = unit_tail;
        const auto fit = fit_map_em(seq, priors, cfg);
        EXPECT_NEAR(fit.trace.back(),
                    observed_log_likelihood(fit.params, seq, cfg.compensator()) + log_prior(fit.params, priors),
                    1e-10 * std::abs(fit.trace.back()));
    }
}

TEST(FitMapEm, RecoversCascade) {
    auto truth = MphpParams::poisson({0.2, 0.0, 0.0});
    truth.excitation(0, 0) = 0.5;
    truth.excitation(0, 1) = 0.5;
    truth.excitation(1, 2) = 0.5;
    const auto seq = simulate(truth, 10'000.0, 21);
    const auto fit = fit_map_em(seq, GammaPriors::flat(3));
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.params.mu[0], 0.2, 0.05);
    for (std::size_t p = 0; p < 3; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            if (truth.alpha(p, c) > 0.0) {
                EXPECT_NEAR(fit.params.alpha(p, c), 0.5, 0.1);
            } else {
                EXPECT_LT(fit.params.alpha(p, c), 0.05);
            }
        }
    }
}

TEST(FitMapEm, PoissonDataGivesSmallExcitation) {
    const auto seq = simulate(MphpParams::poisson({0.3, 0.2}), 5000.0, 22);
    const auto fit = fit_map_em(seq, GammaPriors::flat(2));
    EXPECT_LT(spectral_radius(fit.params.excitation), 0.1);
}

TEST(FitMapEm, RejectsDegenerateInput) {
    EXPECT_THROW((void)fit_map_em(EventSequence({}, 5.0, 1), GammaPriors::flat(1)), InputError);
    EXPECT_THROW((void)fit_map_em(EventSequence({{1.0, 0}}, 5.0, 1), GammaPriors::flat(1)), InputError);
    const EventSequence two({{1.0, 0}, {2.0, 0}}, 5.0, 1);
    EmConfig bad;
    bad.tol = 0.0;
    EXPECT_THROW((void)fit_map_em(two, GammaPriors::flat(1), bad), InputError);
    auto priors = GammaPriors::flat(1);
    priors.shape_a(0, 0) = 0.5;
    EXPECT_THROW((void)fit_map_em(two, priors), InputError);
    EXPECT_THROW((void)fit_map_em(two, GammaPriors::flat(2)), InputError);
}

TEST(FitMapEm, StopsAtMaxIters) {
    const auto seq = simulate(MphpParams::poisson({0.5}), 100.0, 3);
    EmConfig cfg;
    cfg.max_iters = 2;
    cfg.tol = 1e-300;
    const auto fit = fit_map_em(seq, GammaPriors::flat(1), cfg);
    EXPECT_FALSE(fit.converged);
    EXPECT_EQ(fit.iterations, 2u);
    EXPECT_EQ(fit.trace.size(), 3u);
}

TEST(SelectOmega, PrefersGeneratingDecay) {
    auto truth = MphpParams::poisson({0.3}, 7, 4.0);
    truth.excitation(0, 0) = 0.6;
    const auto seq = simulate(truth, 2000.0, 31);
    const double grid[] = {0.25, 4.0, 64.0};
    const auto fit = select_omega(seq, GammaPriors::flat(1), EmConfig{}, grid);
    EXPECT_EQ(fit.params.omega, 4.0);
    EXPECT_THROW((void)select_omega(seq, GammaPriors::flat(1), EmConfig{}, {}), InputError);
}
