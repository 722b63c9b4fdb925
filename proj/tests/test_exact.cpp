#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pblab/exact.hpp"
#include "test_support.hpp"

using namespace pblab;
using Catch::Approx;

namespace {

// Independent oracle: iterate over every bitmask of outcomes.
std::vector<double> bitmask_pmf(const std::vector<double>& p) {
    const std::size_t n = p.size();
    std::vector<double> out(n + 1, 0.0);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) w *= (mask >> i & 1u) ? p[i] : 1.0 - p[i];
        out[std::popcount(mask)] += w;
    }
    return out;
}

const std::vector<double> small_profile{0.1, 0.2, 0.3};
const std::vector<double> small_pmf{0.504, 0.398, 0.092, 0.006};

}  // namespace

TEST_CASE("engines on the three-entry profile", "[exact]") {
    const BernoulliProfile p(small_profile);
    const auto oracle = bitmask_pmf(small_profile);
    for (std::size_t k = 0; k < 4; ++k) CHECK(oracle[k] == Approx(small_pmf[k]).margin(1e-15));

    for (const auto& pmf : {pmf_dp(p), pmf_dc(p), pmf_bruteforce(p)}) {
        REQUIRE(pmf.full_support());
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(pmf.prob(k) - small_pmf[k]) < 1e-15);
    }
    CHECK(pmf_dp(p).provenance == Provenance::dp);
    CHECK(pmf_dc(p).provenance == Provenance::divide_conquer);
    CHECK(pmf_bruteforce(p).provenance == Provenance::brute_force);
}

TEST_CASE("single-entry and zero-entry profiles", "[exact]") {
    const auto half = pmf_dp(BernoulliProfile({0.5}));
    CHECK(half.prob(0) == 0.5);
    CHECK(half.prob(1) == 0.5);
    CHECK(pmf_dc(BernoulliProfile({0.37})).probs() == pmf_dp(BernoulliProfile({0.37})).probs());

    const auto z = pmf_bruteforce(BernoulliProfile({0.0}));
    CHECK(z.prob(0) == 1.0);
    CHECK(z.prob(1) == 0.0);
    CHECK(z.log_probs[1] == numeric::neg_inf);
}

TEST_CASE("dp matches the binomial closed form", "[exact]") {
    for (std::size_t n : {1u, 7u, 40u, 300u}) {
        for (double p : {0.01, 0.3, 0.5, 0.9}) {
            const auto pmf = pmf_dp(BernoulliProfile(std::vector<double>(n, p)));
            for (std::size_t k = 0; k <= n; ++k) {
                const double want = testing::binomial_pmf(n, k, p);
                CHECK(std::abs(pmf.prob(k) - want) <= 1e-13 + 1e-10 * want);
            }
        }
    }
}

TEST_CASE("dp truncation keeps the leading entries", "[exact]") {
    const BernoulliProfile p({0.1, 0.2, 0.3, 0.4, 0.5});
    const auto full = pmf_dp(p);
    const auto cut = pmf_dp(p, 2);
    REQUIRE(cut.log_probs.size() == 3);
    CHECK_FALSE(cut.full_support());
    for (std::size_t k = 0; k <= 2; ++k) CHECK(cut.log_probs[k] == full.log_probs[k]);
    CHECK_THROWS_AS(pmf_dp(p, 6), Error);
}

TEST_CASE("dp survives probabilities whose zero term underflows", "[exact]") {
    const BernoulliProfile p(std::vector<double>(4000, 0.5));
    const auto pmf = pmf_dp(p, 10);
    CHECK(pmf.log_probs[0] == Approx(4000 * std::log(0.5)).epsilon(1e-12));
    const double want = std::lgamma(4001.0) - std::lgamma(11.0) - std::lgamma(3991.0) + 4000 * std::log(0.5);
    CHECK(pmf.log_probs[10] == Approx(want).epsilon(1e-11));
}

TEST_CASE("brute force guards its size", "[exact]") {
    CHECK_THROWS_MATCHES(pmf_bruteforce(BernoulliProfile(std::vector<double>(26, 0.1))), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.kind() == ErrorKind::size; }));
}

TEST_CASE("elementary symmetric sums", "[exact]") {
    const auto s = elementary_symmetric(small_profile, 3);
    REQUIRE(s.values.size() == 4);
    CHECK(s.values[0] == 1.0);
    CHECK(s.values[1] == Approx(0.6).epsilon(1e-15));
    CHECK(s.values[2] == Approx(0.11).epsilon(1e-15));
    CHECK(s.values[3] == Approx(0.006).epsilon(1e-15));
    CHECK(elementary_symmetric(small_profile, 0).values == std::vector<double>{1.0});
    CHECK(elementary_symmetric(std::vector<double>{0.5, 0.5}, 2).values == std::vector<double>{1.0, 1.0, 0.25});

    const auto hp = elementary_symmetric(small_profile, 3, true);
    REQUIRE(hp.exact);
    CHECK(detail::rational_to_double((*hp.exact)[3]) == Approx(0.006).epsilon(1e-15));
}

TEST_CASE("first symmetric sum equals lambda", "[exact]") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        const auto p = testing::random_profile(rng, 1 + rng() % 200);
        std::vector<double> sorted(p.probs().begin(), p.probs().end());
        std::sort(sorted.begin(), sorted.end());
        CHECK(elementary_symmetric(sorted, 1).values[1] == summarize(p).lambda_n);
    }
}

TEST_CASE("inclusion-exclusion from symmetric sums", "[exact]") {
    SymmetricSums sums;
    sums.values = {1.0, 0.6, 0.11, 0.006};
    CHECK(pmf_inclusion_exclusion(sums, 0, 3) == Approx(0.504).margin(1e-15));
    CHECK(pmf_inclusion_exclusion(sums, 1, 3) == Approx(0.398).margin(1e-15));

    SymmetricSums zero;
    zero.values = {1.0, 0.0};
    CHECK(pmf_inclusion_exclusion(zero, 0, 1) == 1.0);

    const auto exact = elementary_symmetric(small_profile, 3, true);
    const auto pmf = pmf_inclusion_exclusion(exact, 3);
    CHECK(pmf.provenance == Provenance::inclusion_exclusion);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(pmf.prob(k) - small_pmf[k]) < 1e-15);
}

TEST_CASE("inclusion-exclusion reports ill-conditioning", "[exact]") {
    const BernoulliProfile p(std::vector<double>(60, 0.6));
    const auto sums = elementary_symmetric(p.probs(), 60);
    CHECK_THROWS_MATCHES(
        pmf_inclusion_exclusion(sums, 0, 60), Error,
        Catch::Matchers::Predicate<Error>([](const Error& e) { return e.kind() == ErrorKind::conditioning; }));

    const auto exact = elementary_symmetric(p.probs(), 60, true);
    const double want = testing::binomial_pmf(60, 0, 0.6);
    CHECK(pmf_inclusion_exclusion(exact, 0, 60) == Approx(want).epsilon(1e-12));
}

TEST_CASE("divide and conquer agrees with dp at n = 2048", "[exact]") {
    std::mt19937_64 rng(2048);
    const auto p = testing::random_profile(rng, 2048);
    const auto a = pmf_dp(p).probs();
    const auto b = pmf_dc(p).probs();
    CHECK(testing::max_abs_diff(a, b) <= 1e-10);
    CHECK(std::abs(pmf_dc(p).total_mass() - 1.0) <= 1e-9);
}

TEST_CASE("divide and conquer around the leaf boundary", "[exact]") {
    std::mt19937_64 rng(64);
    for (std::size_t n : {63u, 64u, 65u, 127u, 128u, 129u, 200u, 513u}) {
        const auto p = testing::random_profile(rng, n);
        CHECK(testing::max_abs_diff(pmf_dp(p).probs(), pmf_dc(p).probs()) <= 1e-12);
    }
}

TEST_CASE("prob_zero_log", "[exact]") {
    CHECK(prob_zero_log(BernoulliProfile(small_profile)) == Approx(-0.685179).margin(1e-6));
    CHECK(prob_zero_log(BernoulliProfile({0.0, 0.0, 0.0})) == 0.0);
    CHECK(prob_zero_log(BernoulliProfile({0.5, 0.5})) == Approx(2 * std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("Poisson reference table", "[exact]") {
    for (double lam : {0.3, 1.0, 10.0, 500.0, 5000.0}) {
        const PoissonRef ref(lam);
        CHECK(ref.cdf(ref.last()) == 1.0);
        const std::size_t mode = static_cast<std::size_t>(lam);
        // log_pmf cancels terms of size lambda ln lambda
        const double tol = 1e-15 * lam * std::log(lam + 2.0) + 1e-13;
        CHECK(ref.pmf(mode) == Approx(std::exp(ref.log_pmf(mode))).epsilon(tol));
        double prev = 0.0;
        for (std::size_t k = ref.first(); k <= ref.last(); ++k) {
            CHECK(ref.cdf(k) >= prev);
            prev = ref.cdf(k);
        }
    }
    CHECK(PoissonRef(1.0).pmf(0) == Approx(std::exp(-1.0)).epsilon(1e-13));
    CHECK_THROWS_AS(PoissonRef(0.0), Error);
}

TEST_CASE("sup CDF distance", "[exact]") {
    const auto pmf = pmf_dp(BernoulliProfile({0.5}));
    const double d = sup_cdf_distance(pmf, PoissonRef(std::numbers::ln2));
    CHECK(d == Approx(1.0 - 0.5 * (1.0 + std::numbers::ln2)).margin(1e-14));
    CHECK(d == Approx(0.153426).margin(1e-6));

    CHECK_THROWS_MATCHES(
        PoissonRef(summarize(BernoulliProfile({0.0, 0.0})).lambda_n), Error,
        Catch::Matchers::Predicate<Error>([](const Error& e) { return e.kind() == ErrorKind::domain; }));

    const auto truncated = pmf_dp(BernoulliProfile(std::vector<double>(50, 0.5)), 10);
    CHECK_THROWS_AS(sup_cdf_distance(truncated, PoissonRef(25.0)), Error);
}

TEST_CASE("distance to Poisson shrinks for constant_total(1)", "[exact]") {
    double prev = 1.0;
    for (std::size_t n : {10u, 100u, 1000u}) {
        const auto p = generate(ProfileFamily::constant_total(1), n);
        const double d = sup_cdf_distance(pmf_dp(p), PoissonRef(1.0));
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("tail cutoff keeps the distance unchanged", "[exact]") {
    const auto p = generate(ProfileFamily::row_power(1, 1.0 / 3.0), 3000);
    const auto s = summarize(p);
    const PoissonRef ref(s.lambda_n);
    CHECK(sup_cdf_distance(pmf_dp(p, tail_cutoff(s)), ref) == Approx(sup_cdf_distance(pmf_dp(p), ref)).margin(1e-13));
}
