#pragma once

// Poisson-type local approximations of P(V_n = k), their explicit finite-n
// error envelopes, window verifiers, and the comparison diagnostics (normal
// local density, sup-CDF distance ratio, Berry-Esseen style residual).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pblab/error.hpp"
#include "pblab/exact.hpp"
#include "pblab/numeric.hpp"
#include "pblab/profiles.hpp"

namespace pblab {

struct ApproxKind {
    enum class Tag { lambda_form, beta_form, poisson_form, poisson_limit, normal_local };

    Tag tag = Tag::lambda_form;
    double lambda = 0.0;  ///< only for poisson_limit

    /// P(V=0) lambda_n^k / k!
    static ApproxKind lambda_form() { return {Tag::lambda_form, 0.0}; }
    /// P(V=0) beta_n^k / k!
    static ApproxKind beta_form() { return {Tag::beta_form, 0.0}; }
    /// exp(-lambda_n) lambda_n^k / k!
    static ApproxKind poisson_form() { return {Tag::poisson_form, 0.0}; }
    /// exp(-lambda) lambda^k / k! for a fixed limit lambda
    static ApproxKind poisson_limit(double lambda) {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorKind::domain, "poisson_limit needs a finite lambda > 0");
        return {Tag::poisson_limit, lambda};
    }
    /// Gaussian density with the row's mean and variance
    static ApproxKind normal_local() { return {Tag::normal_local, 0.0}; }
};

inline std::string_view to_string(ApproxKind::Tag t) {
    switch (t) {
        case ApproxKind::Tag::lambda_form: return "lambda_form";
        case ApproxKind::Tag::beta_form: return "beta_form";
        case ApproxKind::Tag::poisson_form: return "poisson_form";
        case ApproxKind::Tag::poisson_limit: return "poisson_limit";
        case ApproxKind::Tag::normal_local: return "normal_local";
    }
    return "unknown";
}

namespace detail {

inline double log_power_over_factorial(double base, std::size_t k, const char* what) {
    if (k == 0) return 0.0;
    if (!(base > 0.0)) fail(ErrorKind::domain, std::string(what) + " must be positive for k >= 1");
    const double kk = static_cast<double>(k);
    return kk * std::log(base) - numeric::log_factorial(static_cast<std::int64_t>(k));
}

}  // namespace detail

/// Log of the named approximant to P(V_n = k). `p0_log` is ln P(V_n = 0) and
/// is used by the lambda and beta forms only.
inline double approx_pmf(const ApproxKind& kind, const ProfileSummary& s, double p0_log, std::size_t k) {
    switch (kind.tag) {
        case ApproxKind::Tag::lambda_form:
            return p0_log + detail::log_power_over_factorial(s.lambda_n, k, "lambda_n");
        case ApproxKind::Tag::beta_form:
            return p0_log + detail::log_power_over_factorial(s.beta_n, k, "beta_n");
        case ApproxKind::Tag::poisson_form:
            return -s.lambda_n + detail::log_power_over_factorial(s.lambda_n, k, "lambda_n");
        case ApproxKind::Tag::poisson_limit:
            if (!(kind.lambda > 0.0)) fail(ErrorKind::domain, "poisson_limit needs lambda > 0");
            return -kind.lambda + detail::log_power_over_factorial(kind.lambda, k, "lambda");
        case ApproxKind::Tag::normal_local: {
            if (!(s.var_n > 0.0)) fail(ErrorKind::domain, "normal_local needs positive variance");
            const double d = static_cast<double>(k) - s.lambda_n;
            return -0.5 * std::log(2.0 * std::numbers::pi * s.var_n) - d * d / (2.0 * s.var_n);
        }
    }
    return numeric::neg_inf;
}

struct LambdaFormEnvelope {
    double eps1 = 0.0;  ///< k^2 m / lambda
    double eps2 = 0.0;  ///< k m / (1 - k m); +inf once k m >= 1
    bool valid = false; ///< k m < 1 and eps1 < 1
};

/// -eps1 <= P(V=k) / (P(V=0) lambda^k / k!) - 1 <= eps2.
inline LambdaFormEnvelope lambda_form_envelope(const ProfileSummary& s, std::size_t k) {
    if (!(s.lambda_n > 0.0)) fail(ErrorKind::hypothesis, "lambda-form envelope needs lambda_n > 0");
    const double kk = static_cast<double>(k);
    const double km = kk * s.m_n;
    LambdaFormEnvelope e;
    e.eps1 = kk * kk * s.m_n / s.lambda_n;
    e.eps2 = km < 1.0 ? km / (1.0 - km) : std::numeric_limits<double>::infinity();
    e.valid = km < 1.0 && e.eps1 < 1.0;
    return e;
}

struct BetaFormEnvelope {
    double eps = 0.0;   ///< k^2 beta / (lambda (1 - beta))
    bool valid = false; ///< eps < 1
};

/// 1 - eps <= P(V=k) / (P(V=0) beta_n^k / k!) <= 1, for a cap beta >= max b.
/// The cap may equal m_n: the bound only uses b(i;n) <= beta.
inline BetaFormEnvelope beta_form_envelope(const ProfileSummary& s, double beta_cap, std::size_t k) {
    if (!(beta_cap >= s.m_n) || !(beta_cap < 1.0))
        fail(ErrorKind::hypothesis, "beta cap " + std::to_string(beta_cap) + " must satisfy m_n <= cap < 1 (m_n = " +
                                        std::to_string(s.m_n) + ")");
    if (!(s.lambda_n > 0.0)) fail(ErrorKind::hypothesis, "beta-form envelope needs lambda_n > 0");
    const double kk = static_cast<double>(k);
    BetaFormEnvelope e;
    e.eps = kk * kk * beta_cap / (s.lambda_n * (1.0 - beta_cap));
    e.valid = e.eps < 1.0;
    return e;
}

/// Default cap for a single profile: halfway between m_n and 1.
inline double default_beta_cap(const ProfileSummary& s) { return (s.m_n + 1.0) / 2.0; }

struct PoissonFormEnvelope {
    double lower = 0.0;
    double upper = 0.0;
    bool valid = false;  ///< same side conditions as the lambda form
};

namespace detail {

inline void require_poisson_form_hypothesis(const ProfileSummary& s) {
    if (!(s.m_n < 0.5)) fail(ErrorKind::hypothesis, "exact Poisson envelope needs every b(i;n) < 1/2");
}

}  // namespace detail

/// Bracket for P(V=k) / (e^{-lambda} lambda^k / k!) in the form
/// 1 - eps1 <= r <= exp(sum b^2) (1 + eps2).
/// The lower side is not a valid bound: at k = 0 it requires
/// P(V=0) e^{lambda} >= 1, which fails for any nonzero profile. See
/// poisson_form_envelope_composed for the bracket that does hold.
inline PoissonFormEnvelope poisson_form_envelope(const ProfileSummary& s, std::size_t k) {
    detail::require_poisson_form_hypothesis(s);
    const auto base = lambda_form_envelope(s, k);
    return {1.0 - base.eps1, std::exp(s.sum_sq) * (1.0 + base.eps2), base.valid};
}

/// The lambda-form envelope multiplied through by
/// exp(-sum b^2) <= P(V=0) e^{lambda} <= 1:
/// (1 - eps1) exp(-sum b^2) <= r <= 1 + eps2.
inline PoissonFormEnvelope poisson_form_envelope_composed(const ProfileSummary& s, std::size_t k) {
    detail::require_poisson_form_hypothesis(s);
    const auto base = lambda_form_envelope(s, k);
    return {(1.0 - base.eps1) * std::exp(-s.sum_sq), 1.0 + base.eps2, base.valid};
}

enum class PoissonBracket { as_stated, composed };

struct SandwichOptions {
    std::optional<double> beta_cap;  ///< beta form only; defaults to (m_n + 1) / 2
    double margin = 1e-9;            ///< floating-point slack on each side
    PoissonBracket poisson_bracket = PoissonBracket::as_stated;
};

struct EnvelopeReport {
    ApproxKind kind;
    GrowthWindow window;
    ProfileSummary summary;
    double phi = 0.0;
    std::optional<double> beta_cap;
    double margin = 0.0;

    std::vector<std::size_t> k_values;
    std::vector<double> log_exact;
    std::vector<double> log_approx;
    std::vector<double> ratios;
    std::vector<double> lower_env;
    std::vector<double> upper_env;
    std::vector<bool> validity_mask;

    std::size_t violations = 0;  ///< counted among valid k only
    double max_abs_dev = 0.0;    ///< sup over the whole window of |ratio - 1|
};

/// Exact/approximate ratio over {k : k^2 <= phi(n)} against the matching
/// envelope. Exact values come from the dp engine truncated at the window
/// edge; ratios are formed in log space and exponentiated once.
///
/// For the beta form every k is marked valid: the upper side (ratio <= 1)
/// holds unconditionally and the lower side is vacuous once eps >= 1.
inline EnvelopeReport verify_sandwich(const BernoulliProfile& profile, const ApproxKind& kind,
                                      const GrowthWindow& window, const SandwichOptions& opts = {}) {
    using Tag = ApproxKind::Tag;
    if (kind.tag != Tag::lambda_form && kind.tag != Tag::beta_form && kind.tag != Tag::poisson_form)
        fail(ErrorKind::config, "verify_sandwich supports lambda, beta and poisson forms only");
    if (opts.beta_cap && kind.tag != Tag::beta_form)
        fail(ErrorKind::config, "beta cap is only meaningful for the beta form");

    EnvelopeReport r;
    r.kind = kind;
    r.window = window;
    r.summary = summarize(profile);
    r.margin = opts.margin;
    const auto& s = r.summary;

    // Hypotheses are checked before any exact computation.
    if (!(s.lambda_n > 0.0)) fail(ErrorKind::hypothesis, "envelopes need lambda_n > 0");
    if (kind.tag == Tag::beta_form) {
        r.beta_cap = opts.beta_cap.value_or(default_beta_cap(s));
        (void)beta_form_envelope(s, *r.beta_cap, 0);
    }
    if (kind.tag == Tag::poisson_form) detail::require_poisson_form_hypothesis(s);

    r.phi = window(s.n, s.lambda_n);
    const std::size_t k_hi = std::min(s.n, window.k_limit(s.n, s.lambda_n));
    const Pmf exact = pmf_dp(profile, k_hi);
    const double p0_log = exact.log_probs[0];

    for (std::size_t k = 0; k <= k_hi; ++k) {
        const double le = exact.log_probs[k];
        const double la = approx_pmf(kind, s, p0_log, k);
        const double ratio = le == numeric::neg_inf ? 0.0 : std::exp(le - la);
        double lo = 0.0, hi = 0.0;
        bool valid = false;
        switch (kind.tag) {
            case Tag::lambda_form: {
                const auto e = lambda_form_envelope(s, k);
                lo = 1.0 - e.eps1;
                hi = 1.0 + e.eps2;
                valid = e.valid;
                break;
            }
            case Tag::beta_form: {
                const auto e = beta_form_envelope(s, *r.beta_cap, k);
                lo = 1.0 - e.eps;
                hi = 1.0;
                valid = true;
                break;
            }
            case Tag::poisson_form: {
                const auto e = opts.poisson_bracket == PoissonBracket::as_stated ? poisson_form_envelope(s, k)
                                                                                 : poisson_form_envelope_composed(s, k);
                lo = e.lower;
                hi = e.upper;
                valid = e.valid;
                break;
            }
            default: break;
        }
        r.k_values.push_back(k);
        r.log_exact.push_back(le);
        r.log_approx.push_back(la);
        r.ratios.push_back(ratio);
        r.lower_env.push_back(lo);
        r.upper_env.push_back(hi);
        r.validity_mask.push_back(valid);
        if (valid && (ratio < lo - opts.margin || ratio > hi + opts.margin)) ++r.violations;
        r.max_abs_dev = std::max(r.max_abs_dev, std::abs(ratio - 1.0));
    }
    return r;
}

/// sup_k |P(V <= k) - P(T_n <= k)| with T_n ~ Poisson(lambda_n).
inline double poisson_distance(const BernoulliProfile& profile) {
    const auto s = summarize(profile);
    if (!(s.lambda_n > 0.0)) fail(ErrorKind::domain, "distance needs lambda_n > 0");
    const Pmf pmf = pmf_dp(profile, tail_cutoff(s));
    return sup_cdf_distance(pmf, PoissonRef(s.lambda_n));
}

/// D divided by its asymptotic equivalent (sum b^2 / lambda_n) / sqrt(2 pi e).
inline double dehpfeif_ratio(const BernoulliProfile& profile) {
    const auto s = summarize(profile);
    if (!(s.lambda_n > 0.0) || !(s.sum_sq > 0.0))
        fail(ErrorKind::domain, "distance ratio needs lambda_n > 0 and sum b^2 > 0");
    const double scale = s.sum_sq / s.lambda_n * numeric::inv_sqrt_2pi_e;
    return poisson_distance(profile) / scale;
}

struct NormalResidual {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// |B P(V=k) - phi_std((k - lambda)/B)| against C sum p q (p^2 + q^2) / B^3,
/// for a caller-supplied constant C.
inline NormalResidual mmm_residual(const BernoulliProfile& profile, std::size_t k, double c) {
    const auto s = summarize(profile);
    if (!(s.var_n > 0.0)) fail(ErrorKind::domain, "residual needs positive variance");
    if (!(c > 0.0)) fail(ErrorKind::domain, "residual constant C must be positive");
    const double pk = k <= s.n ? pmf_dp(profile, k).prob(k) : 0.0;
    const double b = std::sqrt(s.var_n);
    const double d = static_cast<double>(k) - s.lambda_n;
    NormalResidual out;
    out.lhs = std::abs(b * pk - numeric::inv_sqrt_2pi * std::exp(-d * d / (2.0 * s.var_n)));
    double third = 0.0;
    for (double p : profile.probs()) {
        const double q = 1.0 - p;
        third += p * q * (p * p + q * q);
    }
    out.rhs = c * third / (b * b * b);
    out.holds = out.lhs < out.rhs;
    return out;
}

struct NormalLocalDeviation {
    double sup = 0.0;        ///< sup |exact / normal - 1|
    std::size_t argmax = 0;
    std::size_t points = 0;
};

/// Deviation from the Gaussian local approximation over |k - lambda_n| <= half_width.
inline NormalLocalDeviation normal_local_deviation(const BernoulliProfile& profile, double half_width) {
    const auto s = summarize(profile);
    if (!(s.var_n > 0.0)) fail(ErrorKind::domain, "normal comparison needs positive variance");
    const double lo_d = std::ceil(s.lambda_n - half_width);
    const double hi_d = std::floor(s.lambda_n + half_width);
    const auto lo = static_cast<std::size_t>(std::max(0.0, lo_d));
    const auto hi = static_cast<std::size_t>(std::min(static_cast<double>(s.n), hi_d));
    NormalLocalDeviation out;
    if (hi_d < 0.0 || lo > hi) return out;
    const Pmf pmf = pmf_dp(profile, hi);
    const auto kind = ApproxKind::normal_local();
    for (std::size_t k = lo; k <= hi; ++k) {
        const double ratio = std::exp(pmf.log_probs[k] - approx_pmf(kind, s, 0.0, k));
        const double dev = std::abs(ratio - 1.0);
        if (dev > out.sup || out.points == 0) {
            out.sup = dev;
            out.argmax = k;
        }
        ++out.points;
    }
    return out;
}

}  // namespace pblab
