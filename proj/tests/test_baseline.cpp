#include "oracles.hpp"

#include <mphp/baseline.hpp>
#include <mphp/estimation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mphp;

TEST(FitMpp, UniformTwoPerDay) {
    std::vector<Event> events;
    for (int day = 0; day < 14; ++day) {
        events.push_back({day + 0.5, 0});
    }
    // 14 events over two weeks, so two per day bucket.
    const auto fit = fit_mpp(EventSequence(events, 14.0, 1));
    EXPECT_NEAR(fit.mu[0], 1.0, 1e-15);
    for (double d : fit.delta) {
        EXPECT_NEAR(d, 1.0, 1e-15);
    }
}

TEST(FitMpp, SingleBucket) {
    std::vector<Event> events;
    for (int week = 0; week < 30; ++week) {
        events.push_back({7.0 * week + 0.3, 0});
    }
    const auto fit = fit_mpp(EventSequence(events, 210.0, 1));
    EXPECT_NEAR(fit.delta[0], 7.0, 1e-12);
    for (std::size_t d = 1; d < 7; ++d) {
        EXPECT_EQ(fit.delta[d], 0.0);
    }
    EXPECT_NEAR(fit.mu[0] * fit.delta[0], 1.0, 1e-12);
}

TEST(FitMpp, EqualsHawkesFitWithoutExcitation) {
    std::mt19937_64 gen(61);
    for (int trial = 0; trial < 10; ++trial) {
        auto truth = oracle::random_params(gen, 3, 0.0);
        const double horizon = 50.0 + 9.7 * trial;
        const auto seq = simulate(truth, horizon, 600 + trial);
        ASSERT_GE(seq.size(), 2u);
        const auto closed = fit_mpp(seq);
        const auto em = fit_map_em(seq, GammaPriors::flat(3), EmConfig{}, MphpParams::poisson({1.0, 1.0, 1.0}));
        for (std::size_t u = 0; u < 3; ++u) {
            EXPECT_NEAR(em.params.mu[u], closed.mu[u], 1e-9);
        }
        for (std::size_t d = 0; d < 7; ++d) {
            EXPECT_NEAR(em.params.delta[d], closed.delta[d], 1e-9);
        }
        for (double a : em.params.excitation.values()) {
            EXPECT_EQ(a, 0.0);
        }
    }
}

TEST(FitMpp, MaximizesLikelihood) {
    std::mt19937_64 gen(62);
    std::uniform_real_distribution<double> factor(0.95, 1.05);
    const auto truth = oracle::random_params(gen, 2, 0.0);
    const auto seq = simulate(truth, 103.5, 7);
    const auto best = fit_mpp(seq).as_hawkes();
    const double at_best = observed_log_likelihood(best, seq);
    for (int k = 0; k < 50; ++k) {
        auto other = best;
        for (auto& m : other.mu) {
            m *= factor(gen);
        }
        for (auto& d : other.delta) {
            d *= factor(gen);
        }
        other.delta = normalize_delta(other.delta);
        EXPECT_LE(observed_log_likelihood(other, seq), at_best + 1e-9);
    }
}

TEST(FitMpp, RecoversSimulatedParameters) {
    MppParams truth{{0.5, 0.2}, normalize_delta({2, 1, 1, 1, 1, 0.5, 0.5})};
    const double horizon = 10'000.0;
    const auto fit = fit_mpp(simulate_mpp(truth, horizon, 17));
    for (std::size_t u = 0; u < 2; ++u) {
        EXPECT_NEAR(fit.mu[u], truth.mu[u], 3.0 * std::sqrt(truth.mu[u] / horizon));
    }
    for (std::size_t d = 0; d < 7; ++d) {
        EXPECT_NEAR(fit.delta[d], truth.delta[d], 0.1);
    }
}

TEST(FitMpp, Errors) {
    EXPECT_THROW((void)fit_mpp(EventSequence({}, 10.0, 1)), InputError);
}

TEST(SimulateMpp, CountsBucketsAndDeterminism) {
    const MppParams flat{{2.0}, std::vector<double>(7, 1.0)};
    const auto seq = simulate_mpp(flat, 5000.0, 3);
    EXPECT_NEAR(static_cast<double>(seq.size()), 10'000.0, 300.0);
    EXPECT_EQ(seq, simulate_mpp(flat, 5000.0, 3));

    const MppParams spike{{1.0, 0.5}, {7, 0, 0, 0, 0, 0, 0}};
    const auto peaked = simulate_mpp(spike, 700.0, 4);
    EXPECT_GT(peaked.size(), 0u);
    for (const auto& e : peaked) {
        EXPECT_EQ(day_index(e.t, 7), 0u);
    }
}

TEST(WindowProbability, Examples) {
    const MppParams p{{0.0, 0.5}, std::vector<double>(7, 1.0)};
    EXPECT_EQ(window_event_probability(p, 3.0, 5.0, 0), 0.0);
    EXPECT_NEAR(window_event_probability(p, 3.0, 5.0, 1), 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_NEAR(window_event_probability(p, 3.0, 5.0, 1), 0.63212, 5e-6);
    EXPECT_EQ(window_event_probability(p, 3.0, 3.0, 1), 0.0);
    EXPECT_THROW((void)window_event_probability(p, 3.0, 5.0, 2), InputError);
}

TEST(WindowProbability, PeriodicWindowAndMonotonicity) {
    const MppParams p{{0.4}, normalize_delta({3, 1, 1, 1, 1, 0.5, 0.5})};
    // Window [6.5, 8.25] covers half of day 6 and 1.25 days of the next week.
    const double mass = 0.5 * p.delta[6] + 1.0 * p.delta[0] + 0.25 * p.delta[1];
    EXPECT_NEAR(window_event_probability(p, 6.5, 8.25, 0), 1.0 - std::exp(-0.4 * mass), 1e-15);
    double previous = 0.0;
    for (double len = 0.0; len < 20.0; len += 0.37) {
        const double now = window_event_probability(p, 10.0, 10.0 + len, 0);
        EXPECT_GE(now, previous);
        previous = now;
    }
    previous = 0.0;
    for (double mu = 0.0; mu < 3.0; mu += 0.1) {
        const double now = window_event_probability(MppParams{{mu}, p.delta}, 10.0, 12.0, 0);
        EXPECT_GE(now, previous);
        previous = now;
    }
}
