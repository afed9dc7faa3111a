#pragma once

#include <mphp/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace mphp {

inline constexpr std::size_t kDaysPerWeek = 7;

// Dense row-major square matrix.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        SquareMatrix m(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) {
                throw InputError("matrix rows must all have length " + std::to_string(rows.size()));
            }
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * m.n_);
        }
        return m;
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * n_, n_};
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_{0};
    std::vector<double> data_;
};

// Calendar day bucket of time t (days), with bucket boundaries at integer times.
[[nodiscard]] inline std::size_t day_index(double t, std::size_t num_days) {
    if (!(t >= 0.0)) {
        throw DomainError("day_index requires t >= 0");
    }
    if (num_days == 0) {
        throw DomainError("day_index requires at least one day bucket");
    }
    return static_cast<std::size_t>(std::fmod(std::floor(t), static_cast<double>(num_days)));
}

// Length of each day bucket inside [start, end].
[[nodiscard]] inline std::vector<double> bucket_exposure(double start, double end,
                                                         std::size_t num_days) {
    if (!(start >= 0.0) || end < start) {
        throw DomainError("bucket_exposure requires 0 <= start <= end");
    }
    // Exposure of each bucket on [0, x].
    auto from_origin = [num_days](double x) {
        std::vector<double> out(num_days, 0.0);
        const double whole = std::floor(x);
        const auto full_days = static_cast<unsigned long long>(whole);
        const auto full_weeks = full_days / num_days;
        const auto remainder = full_days % num_days;
        for (std::size_t d = 0; d < num_days; ++d) {
            out[d] = static_cast<double>(full_weeks + (d < remainder ? 1 : 0));
        }
        out[remainder] += x - whole;
        return out;
    };
    auto hi = from_origin(end);
    const auto lo = from_origin(start);
    for (std::size_t d = 0; d < num_days; ++d) {
        hi[d] -= lo[d];
    }
    return hi;
}

// Rescales a non-negative day profile so that it sums to its length.
[[nodiscard]] inline std::vector<double> normalize_delta(std::vector<double> delta) {
    const double total = std::accumulate(delta.begin(), delta.end(), 0.0);
    if (delta.empty() || !(total > 0.0)) {
        throw DomainError("cannot normalize an all-zero day profile");
    }
    const double scale = static_cast<double>(delta.size()) / total;
    for (auto& d : delta) {
        if (d < 0.0) {
            throw DomainError("day profile entries must be non-negative");
        }
        d *= scale;
    }
    return delta;
}

namespace detail {

// True iff rI - A is a nonsingular M-matrix, which for non-negative A holds
// exactly when r > rho(A): elimination without pivoting keeps every pivot
// positive.
inline bool exceeds_spectral_radius(const SquareMatrix& a, double r) {
    const std::size_t n = a.size();
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m[i * n + j] = (i == j ? r : 0.0) - a(i, j);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double pivot = m[k * n + k];
        if (!(pivot > 0.0)) {
            return false;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m[i * n + k] / pivot;
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j = k + 1; j < n; ++j) {
                m[i * n + j] -= f * m[k * n + j];
            }
        }
    }
    return true;
}

} // namespace detail

// Largest eigenvalue modulus of a non-negative matrix, by bisection on the
// M-matrix test above, starting from the largest row sum as upper bound.
[[nodiscard]] inline double spectral_radius(const SquareMatrix& a, double tol = 1e-12) {
    const std::size_t n = a.size();
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (double v : a.row(i)) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw DomainError("spectral_radius requires a finite non-negative matrix");
            }
            row += v;
        }
        hi = std::max(hi, row);
    }
    // rho == 0 exactly when the sparsity graph has no cycle.
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            indegree[j] += a(i, j) > 0.0 ? 1 : 0;
        }
    }
    std::vector<std::size_t> ready;
    for (std::size_t j = 0; j < n; ++j) {
        if (indegree[j] == 0) {
            ready.push_back(j);
        }
    }
    std::size_t removed = 0;
    while (!ready.empty()) {
        const std::size_t i = ready.back();
        ready.pop_back();
        ++removed;
        for (std::size_t j = 0; j < n; ++j) {
            if (a(i, j) > 0.0 && --indegree[j] == 0) {
                ready.push_back(j);
            }
        }
    }
    if (removed == n) {
        return 0.0;
    }
    double lo = 0.0;
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        (detail::exceeds_spectral_radius(a, mid) ? hi : lo) = mid;
    }
    // The upper end, so a matrix with rho == 1 is never reported below 1.
    return hi;
}

struct MphpParams {
    std::vector<double> mu;      // background rate per type (events/day)
    std::vector<double> delta;   // day-of-week multipliers, sum == delta.size()
    // excitation(parent, child): expected number of `child`-type events
    // triggered by one `parent`-type event.
    SquareMatrix excitation;
    double omega{1.0};           // decay rate (1/day)

    [[nodiscard]] std::size_t num_types() const noexcept { return mu.size(); }
    [[nodiscard]] std::size_t num_days() const noexcept { return delta.size(); }
    [[nodiscard]] double alpha(std::size_t parent, std::size_t child) const {
        return excitation(parent, child);
    }

    // Flat day profile, zero excitation.
    static MphpParams poisson(std::vector<double> mu, std::size_t num_days = kDaysPerWeek,
                              double omega = 1.0) {
        const std::size_t u = mu.size();
        return MphpParams{std::move(mu), std::vector<double>(num_days, 1.0), SquareMatrix(u), omega};
    }

    void validate() const {
        const std::size_t u = mu.size();
        if (u == 0) {
            throw InputError("parameters need at least one type");
        }
        if (delta.empty()) {
            throw InputError("parameters need at least one day bucket");
        }
        if (excitation.size() != u) {
            throw InputError("excitation matrix must be U x U");
        }
        if (!(omega > 0.0) || !std::isfinite(omega)) {
            throw InputError("omega must be positive");
        }
        auto non_negative = [](double v) { return v >= 0.0 && std::isfinite(v); };
        if (!std::all_of(mu.begin(), mu.end(), non_negative) ||
            !std::all_of(delta.begin(), delta.end(), non_negative) ||
            !std::all_of(excitation.values().begin(), excitation.values().end(), non_negative)) {
            throw InputError("mu, delta and excitation entries must be finite and non-negative");
        }
        const double total = std::accumulate(delta.begin(), delta.end(), 0.0);
        if (std::abs(total - static_cast<double>(delta.size())) > 1e-9 * static_cast<double>(delta.size())) {
            throw InputError("day profile must sum to the number of day buckets");
        }
    }

    friend bool operator==(const MphpParams&, const MphpParams&) = default;
};

// Gamma(shape, rate) hyperparameters; shape/rate for A are indexed like A.
struct GammaPriors {
    SquareMatrix shape_a;
    SquareMatrix rate_a;
    std::vector<double> shape_delta;
    std::vector<double> rate_delta;

    // shape 1 / rate 0 everywhere: the prior term vanishes.
    static GammaPriors flat(std::size_t num_types, std::size_t num_days = kDaysPerWeek) {
        return uniform(num_types, num_days, 1.0, 0.0, 1.0, 0.0);
    }

    static GammaPriors uniform(std::size_t num_types, std::size_t num_days, double shape_a,
                               double rate_a, double shape_delta, double rate_delta = 0.0) {
        return GammaPriors{SquareMatrix(num_types, shape_a), SquareMatrix(num_types, rate_a),
                           std::vector<double>(num_days, shape_delta),
                           std::vector<double>(num_days, rate_delta)};
    }

    void validate(std::size_t num_types, std::size_t num_days) const {
        if (shape_a.size() != num_types || rate_a.size() != num_types ||
            shape_delta.size() != num_days || rate_delta.size() != num_days) {
            throw InputError("prior dimensions do not match the model");
        }
        auto shape_ok = [](double v) { return v >= 1.0 && std::isfinite(v); };
        auto rate_ok = [](double v) { return v >= 0.0 && std::isfinite(v); };
        if (!std::all_of(shape_a.values().begin(), shape_a.values().end(), shape_ok) ||
            !std::all_of(shape_delta.begin(), shape_delta.end(), shape_ok)) {
            throw InputError("prior shapes must be >= 1");
        }
        if (!std::all_of(rate_a.values().begin(), rate_a.values().end(), rate_ok) ||
            !std::all_of(rate_delta.begin(), rate_delta.end(), rate_ok)) {
            throw InputError("prior rates must be >= 0");
        }
    }
};

} // namespace mphp
