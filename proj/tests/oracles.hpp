#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's likelihood, E-step or simulation code paths.

#include <mphp/events.hpp>
#include <mphp/params.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Real = long double;

inline std::size_t day_of(Real t, std::size_t days) {
    return static_cast<std::size_t>(static_cast<long long>(std::floor(t)) % static_cast<long long>(days));
}

// The intensity summed directly: background plus every event strictly before t.
inline Real direct_intensity(const mphp::MphpParams& p, const mphp::EventSequence& seq, Real t,
                             std::size_t type) {
    Real rate = static_cast<Real>(p.mu[type]) * p.delta[day_of(t, p.num_days())];
    for (const auto& e : seq) {
        if (e.t < t) {
            rate += static_cast<Real>(p.excitation(e.type, type)) * p.omega *
                    std::exp(-static_cast<Real>(p.omega) * (t - e.t));
        }
    }
    return rate;
}

// Intensity seen by event i: background plus events 0..i-1 (index order).
inline Real event_intensity(const mphp::MphpParams& p, const mphp::EventSequence& seq, std::size_t i) {
    const auto& e = seq[i];
    Real rate = static_cast<Real>(p.mu[e.type]) * p.delta[day_of(e.t, p.num_days())];
    for (std::size_t j = 0; j < i; ++j) {
        rate += static_cast<Real>(p.excitation(seq[j].type, e.type)) * p.omega *
                std::exp(-static_cast<Real>(p.omega) * (static_cast<Real>(e.t) - seq[j].t));
    }
    return rate;
}

// Trapezoid rule on each smooth piece of the total intensity (pieces split at
// events and integer day boundaries), with about `step` spacing.
inline Real compensator_by_quadrature(const mphp::MphpParams& p, const mphp::EventSequence& seq, Real step) {
    const Real horizon = seq.horizon();
    std::vector<Real> cuts{0.0L, horizon};
    for (const auto& e : seq) {
        cuts.push_back(e.t);
    }
    for (Real d = 1; d < horizon; d += 1) {
        cuts.push_back(d);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // Rate on (a, b) just right of a: events at exactly a count as past.
    auto total_rate = [&](Real t, Real piece_start) {
        Real sum = 0;
        for (std::size_t u = 0; u < p.num_types(); ++u) {
            Real rate = static_cast<Real>(p.mu[u]) * p.delta[day_of(piece_start, p.num_days())];
            for (const auto& e : seq) {
                if (e.t <= piece_start) {
                    rate += static_cast<Real>(p.excitation(e.type, u)) * p.omega *
                            std::exp(-static_cast<Real>(p.omega) * (t - e.t));
                }
            }
            sum += rate;
        }
        return sum;
    };
    Real total = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const Real a = cuts[k];
        const Real b = cuts[k + 1];
        const auto n = std::max<long long>(1, static_cast<long long>(std::ceil((b - a) / step)));
        const Real h = (b - a) / static_cast<Real>(n);
        Real piece = 0.5L * (total_rate(a, a) + total_rate(b, a));
        for (long long s = 1; s < n; ++s) {
            piece += total_rate(a + h * static_cast<Real>(s), a);
        }
        total += piece * h;
    }
    return total;
}

// Every branching configuration of up to a handful of events: parent[i] == i
// means background, otherwise parent[i] < i.
inline void for_each_branching(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        parent[i] = 0;
    }
    for (;;) {
        visit(parent);
        std::size_t i = 0;
        while (i < n) {
            if (parent[i] < i) {
                ++parent[i];
                break;
            }
            parent[i] = 0;
            ++i;
        }
        if (i == n) {
            return;
        }
    }
}

// Unnormalized weight of one branching configuration (the compensator is
// shared by all configurations and left out).
inline Real branching_weight(const mphp::MphpParams& p, const mphp::EventSequence& seq,
                             const std::vector<std::size_t>& parent) {
    Real w = 1;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& e = seq[i];
        if (parent[i] == i) {
            w *= static_cast<Real>(p.mu[e.type]) * p.delta[day_of(e.t, p.num_days())];
        } else {
            const auto& par = seq[parent[i]];
            w *= static_cast<Real>(p.excitation(par.type, e.type)) * p.omega *
                 std::exp(-static_cast<Real>(p.omega) * (static_cast<Real>(e.t) - par.t));
        }
    }
    return w;
}

// Posterior parent probabilities by enumeration: result[i][j].
inline std::vector<std::vector<Real>> enumerate_responsibilities(const mphp::MphpParams& p,
                                                                 const mphp::EventSequence& seq) {
    const std::size_t n = seq.size();
    std::vector<std::vector<Real>> acc(n, std::vector<Real>(n, 0));
    Real total = 0;
    for_each_branching(n, [&](const std::vector<std::size_t>& parent) {
        const Real w = branching_weight(p, seq, parent);
        total += w;
        for (std::size_t i = 0; i < n; ++i) {
            acc[i][parent[i]] += w;
        }
    });
    for (auto& row : acc) {
        for (auto& v : row) {
            v /= total;
        }
    }
    return acc;
}

// Day-bucket lengths inside [0, T] by unit-step walking.
inline std::vector<Real> bucket_lengths(Real horizon, std::size_t days) {
    std::vector<Real> out(days, 0);
    for (Real d = 0; d < horizon; d += 1) {
        out[day_of(d, days)] += std::min<Real>(1, horizon - d);
    }
    return out;
}

inline Real exact_compensator(const mphp::MphpParams& p, const mphp::EventSequence& seq) {
    const auto lengths = bucket_lengths(seq.horizon(), p.num_days());
    Real total = 0;
    for (std::size_t u = 0; u < p.num_types(); ++u) {
        for (std::size_t d = 0; d < p.num_days(); ++d) {
            total += static_cast<Real>(p.mu[u]) * p.delta[d] * lengths[d];
        }
        for (const auto& e : seq) {
            total += static_cast<Real>(p.excitation(e.type, u)) *
                     (1 - std::exp(-static_cast<Real>(p.omega) * (static_cast<Real>(seq.horizon()) - e.t)));
        }
    }
    return total;
}

// log of sum over branchings of the complete-data likelihood.
inline Real marginal_log_likelihood(const mphp::MphpParams& p, const mphp::EventSequence& seq) {
    Real total = 0;
    for_each_branching(seq.size(), [&](const std::vector<std::size_t>& parent) {
        total += branching_weight(p, seq, parent);
    });
    return std::log(total) - exact_compensator(p, seq);
}

// Dense complete-data log-likelihood with -p log p terms, in long double.
inline Real complete_data(const mphp::MphpParams& p, const mphp::EventSequence& seq,
                          const std::vector<std::vector<Real>>& resp) {
    Real total = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& e = seq[i];
        for (std::size_t j = 0; j <= i; ++j) {
            const Real pij = resp[i][j];
            if (pij == 0) {
                continue;
            }
            Real rate = 0;
            if (j == i) {
                rate = static_cast<Real>(p.mu[e.type]) * p.delta[day_of(e.t, p.num_days())];
            } else {
                rate = static_cast<Real>(p.excitation(seq[j].type, e.type)) * p.omega *
                       std::exp(-static_cast<Real>(p.omega) * (static_cast<Real>(e.t) - seq[j].t));
            }
            total += pij * std::log(rate / pij);
        }
    }
    return total - exact_compensator(p, seq);
}

// Solves (I - A^T) n = mu * T by Gaussian elimination with partial pivoting.
inline std::vector<double> expected_counts(const mphp::MphpParams& p, double horizon) {
    const std::size_t u = p.num_types();
    std::vector<std::vector<double>> m(u, std::vector<double>(u + 1, 0.0));
    for (std::size_t r = 0; r < u; ++r) {
        for (std::size_t c = 0; c < u; ++c) {
            m[r][c] = (r == c ? 1.0 : 0.0) - p.excitation(c, r);
        }
        m[r][u] = p.mu[r] * horizon;
    }
    for (std::size_t col = 0; col < u; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < u; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(m[col], m[pivot]);
        for (std::size_t r = 0; r < u; ++r) {
            if (r != col) {
                const double f = m[r][col] / m[col][col];
                for (std::size_t c = col; c <= u; ++c) {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    std::vector<double> out(u);
    for (std::size_t r = 0; r < u; ++r) {
        out[r] = m[r][u] / m[r][r];
    }
    return out;
}

// Binomial(n, p) two-sided central interval at the given confidence.
inline std::pair<std::size_t, std::size_t> binomial_interval(std::size_t n, double p, double confidence) {
    std::vector<double> pmf(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        pmf[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                          static_cast<double>(k) * std::log(p) + static_cast<double>(n - k) * std::log1p(-p));
    }
    const double tail = (1.0 - confidence) / 2.0;
    std::size_t lo = 0;
    double cdf = pmf[0];
    while (cdf < tail) {
        cdf += pmf[++lo];
    }
    std::size_t hi = n;
    double upper = pmf[n];
    while (upper < tail) {
        upper += pmf[--hi];
    }
    return {lo, hi};
}

// A random parameter set with spectral radius kept low by row scaling.
inline mphp::MphpParams random_params(std::mt19937_64& gen, std::size_t types, double max_row_sum,
                                      bool flat_days = false) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    mphp::MphpParams p = mphp::MphpParams::poisson(std::vector<double>(types, 0.0));
    for (auto& m : p.mu) {
        m = 0.05 + 0.5 * unit(gen);
    }
    if (!flat_days) {
        for (auto& d : p.delta) {
            d = 0.3 + unit(gen);
        }
        p.delta = mphp::normalize_delta(p.delta);
    }
    for (std::size_t r = 0; r < types; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < types; ++c) {
            p.excitation(r, c) = unit(gen) < 0.3 ? 0.0 : unit(gen);
            row += p.excitation(r, c);
        }
        if (row > 0.0) {
            const double scale = max_row_sum * unit(gen) / row;
            for (std::size_t c = 0; c < types; ++c) {
                p.excitation(r, c) *= scale;
            }
        }
    }
    p.omega = 0.5 + 1.5 * unit(gen);
    return p;
}

// Random event sequence of n events on [0, horizon] over `types` types.
inline mphp::EventSequence random_sequence(std::mt19937_64& gen, std::size_t n, double horizon, std::size_t types) {
    std::uniform_real_distribution<double> time(0.0, horizon);
    std::uniform_int_distribution<std::size_t> type(0, types - 1);
    std::vector<mphp::Event> events;
    for (std::size_t i = 0; i < n; ++i) {
        events.push_back({time(gen), type(gen)});
    }
    return mphp::EventSequence::from_unsorted(std::move(events), horizon, types);
}

} // namespace oracle
