#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace mphp {

// SplitMix64 finalizer; used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of sub-stream `stream` of `base`. Replicate r of any Monte Carlo loop
// uses derive_seed(seed, r); nested loops chain the rule.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with distribution code written out here, so a seed gives the
// same draws on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Index k with probability weights[k] / total; `total` must be >= sum(weights).
    // Returns weights.size() for the leftover mass total - sum(weights).
    std::size_t weighted_index(std::span<const double> weights, double total) {
        const double target = uniform() * total;
        double cumulative = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            cumulative += weights[k];
            if (target < cumulative) {
                return k;
            }
        }
        return weights.size();
    }

    // Uniform integer in [lo, hi].
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo + 1;
        if (span == 0) {
            return engine_();
        }
        // Rejection keeps the draw exactly uniform.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x = 0;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + x % span;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace mphp
