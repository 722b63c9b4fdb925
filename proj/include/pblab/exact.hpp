#pragma once

// Exact distribution of the row sum V_n: convolution recurrence, divide and
// conquer polynomial product, literal subset enumeration, and the alternating
// inclusion-exclusion sum over symmetric sums. Plus the sup-CDF distance to a
// Poisson reference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "pblab/error.hpp"
#include "pblab/fft.hpp"
#include "pblab/numeric.hpp"
#include "pblab/profiles.hpp"

namespace pblab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

enum class Provenance { dp, divide_conquer, brute_force, inclusion_exclusion, mixture_closed_form };

inline std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::dp: return "dp";
        case Provenance::divide_conquer: return "divide_conquer";
        case Provenance::brute_force: return "brute_force";
        case Provenance::inclusion_exclusion: return "inclusion_exclusion";
        case Provenance::mixture_closed_form: return "mixture_closed_form";
    }
    return "unknown";
}

enum class Precision { floating, rational };

/// Distribution of V_n over {0, ..., K}, stored as log-probabilities with
/// -infinity for exact (or underflowed) zeros.
struct Pmf {
    std::vector<double> log_probs;
    std::size_t n = 0;
    Provenance provenance = Provenance::dp;

    [[nodiscard]] std::size_t support_max() const { return log_probs.size() - 1; }
    [[nodiscard]] bool full_support() const { return log_probs.size() == n + 1; }
    [[nodiscard]] double log_prob(std::size_t k) const {
        return k < log_probs.size() ? log_probs[k] : numeric::neg_inf;
    }
    [[nodiscard]] double prob(std::size_t k) const { return std::exp(log_prob(k)); }

    [[nodiscard]] std::vector<double> probs() const {
        std::vector<double> out(log_probs.size());
        std::transform(log_probs.begin(), log_probs.end(), out.begin(), [](double l) { return std::exp(l); });
        return out;
    }

    [[nodiscard]] double total_mass() const {
        numeric::CompensatedSum s;
        for (double l : log_probs) s += std::exp(l);
        return s.value();
    }

    static Pmf from_linear(std::span<const double> probs, std::size_t n, Provenance prov) {
        Pmf out;
        out.n = n;
        out.provenance = prov;
        out.log_probs.resize(probs.size());
        for (std::size_t k = 0; k < probs.size(); ++k) out.log_probs[k] = numeric::safe_log(probs[k]);
        return out;
    }
};

/// S_0..S_K with S_0 = 1. `exact` optionally mirrors the values as rationals.
struct SymmetricSums {
    std::vector<double> values;
    std::optional<std::vector<Rational>> exact;

    [[nodiscard]] std::size_t k_max() const { return values.size() - 1; }
    [[nodiscard]] double operator[](std::size_t k) const { return k < values.size() ? values[k] : 0.0; }
};

/// Elementary symmetric polynomials e_0..e_{k_max} of `values` by the
/// recurrence E_i(k) = E_{i-1}(k) + v_i E_{i-1}(k-1). With `high_precision`
/// the same recurrence is also run in exact rationals (every double is an
/// exact dyadic rational).
inline SymmetricSums elementary_symmetric(std::span<const double> values, std::size_t k_max,
                                          bool high_precision = false) {
    if (k_max > values.size()) fail(ErrorKind::domain, "elementary_symmetric: k_max exceeds number of values");
    SymmetricSums out;
    out.values.assign(k_max + 1, 0.0);
    out.values[0] = 1.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t top = std::min(i + 1, k_max);
        for (std::size_t k = top; k >= 1; --k) out.values[k] += values[i] * out.values[k - 1];
    }
    if (high_precision) {
        std::vector<Rational> e(k_max + 1, Rational(0));
        e[0] = 1;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const Rational v(values[i]);
            const std::size_t top = std::min(i + 1, k_max);
            for (std::size_t k = top; k >= 1; --k) e[k] += v * e[k - 1];
        }
        out.exact = std::move(e);
    }
    return out;
}

namespace detail {

inline constexpr double conditioning_limit = 1e-6;

inline double rational_to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace detail

/// P(V = k) = sum_l (-1)^l C(k+l, k) S_{k+l}.
///
/// With an exact mirror the sum is formed in rationals and rounded once.
/// Otherwise it is accumulated with compensated summation and rejected with a
/// conditioning error when the estimated relative error (cancellation factor
/// times term count times machine epsilon) exceeds 1e-6. This method is meant
/// as an oracle for small n; for n beyond ~25 expect conditioning errors.
inline double pmf_inclusion_exclusion(const SymmetricSums& sums, std::size_t k, std::size_t n) {
    if (k > n) return 0.0;
    if (sums.k_max() < n) fail(ErrorKind::domain, "inclusion-exclusion: symmetric sums must cover indices up to n");
    if (sums.exact && sums.exact->size() != sums.values.size())
        fail(ErrorKind::domain, "inclusion-exclusion: exact mirror length mismatch");
    const std::size_t top = n;

    if (sums.exact) {
        const auto& s = *sums.exact;
        Rational acc(0);
        BigInt binom(1);  // C(k+l, k)
        for (std::size_t j = k; j <= top; ++j) {
            const std::size_t l = j - k;
            if (l > 0) {
                binom *= static_cast<unsigned long long>(j);
                binom /= static_cast<unsigned long long>(l);
            }
            if (l % 2 == 0)
                acc += Rational(binom) * s[j];
            else
                acc -= Rational(binom) * s[j];
        }
        const double v = detail::rational_to_double(acc);
        return std::clamp(v, 0.0, 1.0);
    }

    numeric::CompensatedSum acc;
    double binom = 1.0;
    for (std::size_t j = k; j <= top; ++j) {
        const std::size_t l = j - k;
        if (l > 0) binom = binom * static_cast<double>(j) / static_cast<double>(l);
        const double term = binom * sums.values[j];
        acc += (l % 2 == 0) ? term : -term;
    }
    const double value = acc.value();
    const double eps = std::numeric_limits<double>::epsilon();
    const double terms = static_cast<double>(acc.count()) + 2.0;
    if (acc.magnitude() > 0.0) {
        const double rel = std::abs(value) > 0.0 ? acc.magnitude() * terms * eps / std::abs(value)
                                                 : std::numeric_limits<double>::infinity();
        if (rel > detail::conditioning_limit)
            fail(ErrorKind::conditioning,
                 "inclusion-exclusion for k = " + std::to_string(k) + ", n = " + std::to_string(n) +
                     " is ill-conditioned in floating point (estimated relative error " + std::to_string(rel) +
                     "); use rational precision");
    }
    return std::clamp(value, 0.0, 1.0);
}

/// Whole distribution by inclusion-exclusion.
inline Pmf pmf_inclusion_exclusion(const SymmetricSums& sums, std::size_t n) {
    std::vector<double> p(n + 1);
    for (std::size_t k = 0; k <= n; ++k) p[k] = pmf_inclusion_exclusion(sums, k, n);
    return Pmf::from_linear(p, n, Provenance::inclusion_exclusion);
}

/// Convolution recurrence f_i(k) = f_{i-1}(k)(1-p_i) + f_{i-1}(k-1) p_i over
/// 0..k_max. The working vector is rescaled by powers of two when it drifts
/// toward underflow, so entries stay meaningful in log form even when
/// P(V=0) is below the double range.
inline Pmf pmf_dp(const BernoulliProfile& profile, std::optional<std::size_t> k_max = std::nullopt) {
    const std::size_t n = profile.size();
    const std::size_t kk = k_max.value_or(n);
    if (kk > n) fail(ErrorKind::domain, "pmf_dp: k_max exceeds n");

    std::vector<double> f(kk + 1, 0.0);
    f[0] = 1.0;
    long scale_exp = 0;  // true value = f * 2^scale_exp
    for (std::size_t i = 0; i < n; ++i) {
        const double p = profile[i];
        const double q = 1.0 - p;
        const std::size_t top = std::min(i + 1, kk);
        double hi = 0.0;
        for (std::size_t k = top; k >= 1; --k) {
            f[k] = f[k] * q + f[k - 1] * p;
            hi = std::max(hi, f[k]);
        }
        f[0] *= q;
        hi = std::max(hi, f[0]);
        if (hi > 0.0 && hi < 0x1p-600) {
            int e = 0;
            std::frexp(hi, &e);
            for (double& x : f) x = std::ldexp(x, -e);
            scale_exp += e;
        }
    }
    Pmf out;
    out.n = n;
    out.provenance = Provenance::dp;
    out.log_probs.resize(kk + 1);
    const double shift = static_cast<double>(scale_exp) * std::numbers::ln2;
    for (std::size_t k = 0; k <= kk; ++k) out.log_probs[k] = f[k] > 0.0 ? std::log(f[k]) + shift : numeric::neg_inf;
    return out;
}

namespace detail {

inline constexpr std::size_t dc_leaf = 64;

inline std::vector<double> poly_product(std::span<const double> probs) {
    if (probs.size() <= dc_leaf) {
        std::vector<double> f(probs.size() + 1, 0.0);
        f[0] = 1.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const double p = probs[i];
            for (std::size_t k = i + 1; k >= 1; --k) f[k] = f[k] * (1.0 - p) + f[k - 1] * p;
            f[0] *= 1.0 - p;
        }
        return f;
    }
    const std::size_t mid = probs.size() / 2;
    const auto left = poly_product(probs.first(mid));
    const auto right = poly_product(probs.subspan(mid));
    auto out = std::min(left.size(), right.size()) <= dc_leaf ? convolve_direct(left, right)
                                                               : convolve_fft(left, right);
    for (double& x : out) x = std::max(x, 0.0);
    return out;
}

}  // namespace detail

/// Product of the factors (1-p_i) + p_i z by halving, FFT multiplication
/// above 64 coefficients. Linear domain: accuracy is absolute (~1e-15 per
/// entry), tail entries below that are noise clamped at zero.
inline Pmf pmf_dc(const BernoulliProfile& profile) {
    const auto coeffs = detail::poly_product(profile.probs());
    return Pmf::from_linear(coeffs, profile.size(), Provenance::divide_conquer);
}

inline constexpr std::size_t bruteforce_max_n = 25;

/// Literal sum over all subsets B of prod_{B} p prod_{B^c} (1-p).
inline Pmf pmf_bruteforce(const BernoulliProfile& profile) {
    const std::size_t n = profile.size();
    if (n > bruteforce_max_n)
        fail(ErrorKind::size, "pmf_bruteforce: n = " + std::to_string(n) + " exceeds " + std::to_string(bruteforce_max_n));
    std::vector<numeric::CompensatedSum> acc(n + 1);
    const auto probs = profile.probs();
    std::function<void(std::size_t, std::size_t, double)> visit = [&](std::size_t i, std::size_t ones, double w) {
        if (i == n) {
            acc[ones] += w;
            return;
        }
        visit(i + 1, ones + 1, w * probs[i]);
        visit(i + 1, ones, w * (1.0 - probs[i]));
    };
    visit(0, 0, 1.0);
    std::vector<double> p(n + 1);
    for (std::size_t k = 0; k <= n; ++k) p[k] = acc[k].value();
    return Pmf::from_linear(p, n, Provenance::brute_force);
}

/// alpha_n = ln P(V_n = 0).
inline double prob_zero_log(const BernoulliProfile& profile) { return summarize(profile).alpha_n; }

/// Poisson(lambda) tabulated around its mode; terms below
/// tail_mass * 1e-5 of the modal term are dropped and the table is
/// renormalized, so the CDF reaches exactly one.
class PoissonRef {
public:
    explicit PoissonRef(double lambda, double tail_mass = 1e-15) : lambda_(lambda) {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorKind::domain, "Poisson reference needs lambda > 0");
        const auto mode = static_cast<std::size_t>(std::floor(lambda));
        const double cut = tail_mass * 1e-5;

        std::vector<double> up{1.0};  // relative to the modal term
        for (std::size_t k = mode;; ++k) {
            const double next = up.back() * lambda / static_cast<double>(k + 1);
            if (next < cut) break;
            up.push_back(next);
        }
        std::vector<double> down;
        double t = 1.0;
        for (std::size_t k = mode; k > 0; --k) {
            t *= static_cast<double>(k) / lambda;
            if (t < cut) break;
            down.push_back(t);
        }
        first_ = mode - down.size();
        pmf_.assign(down.rbegin(), down.rend());
        pmf_.insert(pmf_.end(), up.begin(), up.end());

        numeric::CompensatedSum total;
        for (double x : pmf_) total += x;
        cdf_.resize(pmf_.size());
        numeric::CompensatedSum run;
        for (std::size_t i = 0; i < pmf_.size(); ++i) {
            pmf_[i] /= total.value();
            run += pmf_[i];
            cdf_[i] = run.value();
        }
        cdf_.back() = 1.0;
    }

    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] std::size_t first() const { return first_; }
    [[nodiscard]] std::size_t last() const { return first_ + pmf_.size() - 1; }

    [[nodiscard]] double pmf(std::size_t k) const {
        return (k < first_ || k > last()) ? 0.0 : pmf_[k - first_];
    }
    [[nodiscard]] double cdf(std::size_t k) const {
        if (k < first_) return 0.0;
        if (k > last()) return 1.0;
        return cdf_[k - first_];
    }
    /// Untruncated log pmf.
    [[nodiscard]] double log_pmf(std::size_t k) const {
        return -lambda_ + static_cast<double>(k) * std::log(lambda_) - numeric::log_factorial(static_cast<std::int64_t>(k));
    }

private:
    double lambda_;
    std::size_t first_ = 0;
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

/// D = sup_k |P(V <= k) - P(T <= k)|, scanned until both CDFs exceed 1 - 1e-12.
/// The pmf must cover 0..n, or be truncated where its remaining tail mass is
/// below 1e-12.
inline double sup_cdf_distance(const Pmf& pmf, const PoissonRef& ref) {
    constexpr double done = 1.0 - 1e-12;
    if (!pmf.full_support() && pmf.total_mass() < done)
        fail(ErrorKind::domain, "sup_cdf_distance: pmf is truncated before its mass reaches 1 - 1e-12");
    const std::size_t end = std::max(pmf.support_max(), ref.last());
    numeric::CompensatedSum f;
    double d = 0.0;
    for (std::size_t k = 0; k <= end; ++k) {
        f += pmf.prob(k);
        const double g = ref.cdf(k);
        d = std::max(d, std::abs(f.value() - g));
        if (f.value() > done && g > done) break;
    }
    return d;
}

/// Smallest K such that a dp pmf truncated at K leaves tail mass far below
/// 1e-12: mean + 12 sd + 30, capped at n.
inline std::size_t tail_cutoff(const ProfileSummary& s) {
    const double k = s.lambda_n + 12.0 * std::sqrt(s.var_n) + 30.0;
    return std::min(s.n, static_cast<std::size_t>(std::ceil(k)));
}

}  // namespace pblab
