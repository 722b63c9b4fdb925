#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace pblab::numeric {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// ln(1 - p), accurate for p near zero.
inline double log1m(double p) { return std::log1p(-p); }

namespace detail {

inline const std::array<double, 21>& log_factorial_table() {
    static const std::array<double, 21> table = [] {
        std::array<double, 21> t{};
        t[0] = 0.0;
        for (int k = 1; k <= 20; ++k) t[k] = t[k - 1] + std::log(static_cast<double>(k));
        return t;
    }();
    return table;
}

}  // namespace detail

/// ln k!. Cumulative sum of logs up to 20, lgamma beyond.
inline double log_factorial(std::int64_t k) {
    if (k <= 20) return detail::log_factorial_table()[static_cast<std::size_t>(k)];
    return std::lgamma(static_cast<double>(k) + 1.0);
}

/// ln C(n, k) for 0 <= k <= n.
inline double log_binomial(std::int64_t n, std::int64_t k) {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == neg_inf) return a;
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) return neg_inf;
    const double hi = *std::max_element(xs.begin(), xs.end());
    if (hi == neg_inf) return neg_inf;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - hi);
    return hi + std::log(s);
}

/// Neumaier's variant of Kahan summation. Also tracks the sum of
/// magnitudes, which callers use to judge cancellation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        abs_sum_ += std::abs(x);
        ++count_;
    }

    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }

    [[nodiscard]] double value() const { return sum_ + comp_; }
    [[nodiscard]] double magnitude() const { return abs_sum_; }
    [[nodiscard]] std::size_t count() const { return count_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    double abs_sum_ = 0.0;
    std::size_t count_ = 0;
};

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : neg_inf; }

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;

/// 1 / sqrt(2 pi e)
inline const double inv_sqrt_2pi_e = 1.0 / std::sqrt(2.0 * std::numbers::pi * std::numbers::e);

}  // namespace pblab::numeric
