#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pblab/pblab.hpp"
#include "test_support.hpp"

namespace pblab::testing {

struct PropertyResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;

    void record(bool ok, const std::string& what) {
        ++cases;
        if (!ok && failures++ == 0) first_failure = what;
    }
    [[nodiscard]] bool passed() const { return cases > 0 && failures == 0; }
};

inline PropertyResult prop_permutation_invariance(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "permutation invariance";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 80;
        const auto p = random_profile(rng, n);
        auto v = std::vector<double>(p.probs().begin(), p.probs().end());
        std::shuffle(v.begin(), v.end(), rng);
        const BernoulliProfile q(v);
        const auto sp = summarize(p), sq = summarize(q);
        bool ok = sp.lambda_n == sq.lambda_n && sp.alpha_n == sq.alpha_n && sp.beta_n == sq.beta_n &&
                  sp.sum_sq == sq.sum_sq && sp.var_n == sq.var_n && sp.m_n == sq.m_n;
        ok = ok && max_abs_diff(pmf_dp(p).probs(), pmf_dp(q).probs()) <= 1e-14;
        ok = ok && max_abs_diff(pmf_dc(p).probs(), pmf_dc(q).probs()) <= 1e-14;
        if (n <= 12) ok = ok && max_abs_diff(pmf_bruteforce(p).probs(), pmf_bruteforce(q).probs()) <= 1e-14;
        r.record(ok, "n=" + std::to_string(n) + " trial " + std::to_string(t));
    }
    return r;
}

inline PropertyResult prop_complement_duality(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "complement duality";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 80;
        const auto p = random_profile(rng, n, 0.001, 0.999);
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = 1.0 - p[i];
        const auto a = pmf_dp(p);
        const auto b = pmf_dp(BernoulliProfile(c));
        double dev = 0.0;
        for (std::size_t k = 0; k <= n; ++k) dev = std::max(dev, std::abs(a.prob(k) - b.prob(n - k)));
        r.record(dev <= 1e-12, "n=" + std::to_string(n) + " dev=" + std::to_string(dev));
    }
    return r;
}

/// -x - x^2 <= ln(1 - x) <= -x on an even grid of (0, 1/2).
inline PropertyResult prop_log_sandwich(std::size_t points) {
    PropertyResult r;
    r.name = "log sandwich on (0,1/2)";
    for (std::size_t i = 1; i <= points; ++i) {
        const double x = 0.5 * static_cast<double>(i) / static_cast<double>(points + 1);
        const double l = numeric::log1m(x);
        r.record(-x - x * x <= l && l <= -x, "x=" + std::to_string(x));
    }
    return r;
}

inline PropertyResult prop_zero_identity(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "k=0 identity";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 200;
        const auto p = random_profile(rng, n, 0.001, 0.45);
        const auto s = summarize(p);
        const double p0 = prob_zero_log(p);
        bool ok = approx_pmf(ApproxKind::lambda_form(), s, p0, 0) == p0 &&
                  approx_pmf(ApproxKind::beta_form(), s, p0, 0) == p0;
        for (const auto& kind : {ApproxKind::lambda_form(), ApproxKind::beta_form(), ApproxKind::poisson_form()}) {
            const auto rep = verify_sandwich(p, kind, GrowthWindow::constant(1));
            if (kind.tag != ApproxKind::Tag::poisson_form) ok = ok && rep.ratios[0] == 1.0;
        }
        const double x = s.alpha_n + s.lambda_n;
        ok = ok && x <= 1e-12 && x >= -s.sum_sq - 1e-12;
        r.record(ok, "n=" + std::to_string(n));
    }
    return r;
}

inline PropertyResult prop_window_monotone(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "window monotonicity";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng() % 300;
        const auto p = random_profile(rng, n, 0.0, 0.4);
        if (!(summarize(p).lambda_n > 0.0)) continue;
        const ApproxKind kinds[] = {ApproxKind::lambda_form(), ApproxKind::beta_form(), ApproxKind::poisson_form()};
        const auto kind = kinds[t % 3];
        double prev = -1.0;
        bool ok = true;
        for (double phi : {0.5, 1.0, 4.0, 9.0, 30.0, 100.0}) {
            const double dev = verify_sandwich(p, kind, GrowthWindow::constant(phi)).max_abs_dev;
            ok = ok && dev >= prev;
            prev = dev;
        }
        r.record(ok, "n=" + std::to_string(n));
    }
    return r;
}

inline PropertyResult prop_joint_monotone(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "mixture joint monotonicity";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 40;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const MixtureModel m(u(rng), random_profile(rng, n, 0.0, 0.99), random_profile(rng, n, 0.0, 0.99));
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> set;
        double prev = m.joint(set);
        bool ok = prev == 1.0;
        for (std::size_t i : order) {
            set.insert(std::upper_bound(set.begin(), set.end(), i), i);
            const double cur = m.joint(set);
            ok = ok && cur <= prev;
            prev = cur;
        }
        r.record(ok, "n=" + std::to_string(n));
    }
    return r;
}

/// Every engine against the brute-force oracle, n <= 12.
inline PropertyResult prop_oracle_equivalence(std::uint64_t seed, std::size_t trials) {
    PropertyResult r;
    r.name = "oracle equivalence";
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + rng() % 12;
        const auto p = random_profile(rng, n, 0.0, 0.9);
        const auto oracle = pmf_bruteforce(p).probs();
        const auto ie = pmf_inclusion_exclusion(elementary_symmetric(p.probs(), n, true), n).probs();
        const bool ok = max_abs_diff(pmf_dp(p).probs(), oracle) <= 1e-12 &&
                        max_abs_diff(pmf_dc(p).probs(), oracle) <= 1e-12 && max_abs_diff(ie, oracle) <= 1e-12 &&
                        std::abs(pmf_dp(p).total_mass() - 1.0) <= 1e-9;
        r.record(ok, "n=" + std::to_string(n));
    }
    return r;
}

inline std::vector<PropertyResult> run_property_suite(std::uint64_t seed) {
    return {prop_permutation_invariance(seed + 1, 300), prop_complement_duality(seed + 2, 300),
            prop_log_sandwich(10000),                   prop_zero_identity(seed + 3, 300),
            prop_window_monotone(seed + 4, 300),        prop_joint_monotone(seed + 5, 1000),
            prop_oracle_equivalence(seed + 6, 300)};
}

}  // namespace pblab::testing
