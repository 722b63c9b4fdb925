#pragma once

// Dependent Bernoulli rows described through joint success probabilities
// b~(i_1..i_k; n) of index sets: symmetric sums, the inclusion-exclusion
// distribution, the rare-set conditions comparing b~ with an independent
// row, and the finite-n ratio P(V~ = k) / P(V = k).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pblab/error.hpp"
#include "pblab/exact.hpp"
#include "pblab/profiles.hpp"

namespace pblab {

/// Index sets are passed sorted ascending, distinct, 0-based.
using IndexSet = std::span<const std::size_t>;

class DependentModel {
public:
    virtual ~DependentModel() = default;

    [[nodiscard]] virtual std::size_t n() const = 0;
    [[nodiscard]] virtual double joint(IndexSet indices) const = 0;

    [[nodiscard]] virtual std::vector<double> marginals() const {
        std::vector<double> out(n());
        for (std::size_t i = 0; i < n(); ++i) {
            const std::size_t one[1] = {i};
            out[i] = joint(one);
        }
        return out;
    }

    /// S~_0..S~_{k_max} over the indices with keep[i] set (all indices when
    /// keep is empty), if the model has a closed form for them.
    [[nodiscard]] virtual std::optional<SymmetricSums> fast_sums(std::size_t /*k_max*/, bool /*high_precision*/,
                                                                 const std::vector<bool>& /*keep*/ = {}) const {
        return std::nullopt;
    }
};

namespace detail {

inline std::vector<double> kept(std::span<const double> v, const std::vector<bool>& keep) {
    if (keep.empty()) return {v.begin(), v.end()};
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (keep[i]) out.push_back(v[i]);
    return out;
}

/// Pads sums with exact zeros up to k_max (when fewer indices are kept).
inline SymmetricSums restricted_sums(std::span<const double> v, const std::vector<bool>& keep, std::size_t k_max,
                                     bool high_precision) {
    const auto vals = kept(v, keep);
    auto s = elementary_symmetric(vals, std::min(k_max, vals.size()), high_precision);
    s.values.resize(k_max + 1, 0.0);
    if (s.exact) s.exact->resize(k_max + 1, Rational(0));
    return s;
}

/// Calls f on every k-subset of `pool` (sorted), in lexicographic order.
template <typename F>
void for_each_combination(std::span<const std::size_t> pool, std::size_t k, F&& f) {
    const std::size_t m = pool.size();
    if (k > m) return;
    std::vector<std::size_t> pos(k);
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) pos[i] = i;
    while (true) {
        for (std::size_t i = 0; i < k; ++i) idx[i] = pool[pos[i]];
        f(IndexSet(idx));
        std::size_t i = k;
        while (i > 0 && pos[i - 1] == m - k + (i - 1)) --i;
        if (i == 0) return;
        ++pos[i - 1];
        for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
    }
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

/// C(n, k) as a double, saturating at +inf.
inline double binomial_count(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

}  // namespace detail

/// Independent row seen as a dependent model: b~(S) = prod_{i in S} p_i.
class ProductModel final : public DependentModel {
public:
    explicit ProductModel(BernoulliProfile p) : p_(std::move(p)) {}

    [[nodiscard]] std::size_t n() const override { return p_.size(); }
    [[nodiscard]] double joint(IndexSet s) const override {
        double prod = 1.0;
        for (std::size_t i : s) prod *= p_[i];
        return prod;
    }
    [[nodiscard]] std::vector<double> marginals() const override { return {p_.probs().begin(), p_.probs().end()}; }
    [[nodiscard]] std::optional<SymmetricSums> fast_sums(std::size_t k_max, bool high_precision,
                                                         const std::vector<bool>& keep = {}) const override {
        return detail::restricted_sums(p_.probs(), keep, k_max, high_precision);
    }

    [[nodiscard]] const BernoulliProfile& profile() const { return p_; }

private:
    BernoulliProfile p_;
};

/// A latent switch picks profile q with probability eps, else p; given the
/// switch the row is independent. b~(S) = (1-eps) prod p + eps prod q.
class MixtureModel final : public DependentModel {
public:
    MixtureModel(double eps, BernoulliProfile p, BernoulliProfile q) : eps_(eps), p_(std::move(p)), q_(std::move(q)) {
        if (!(eps >= 0.0 && eps <= 1.0)) fail(ErrorKind::range, "mixture weight eps must lie in [0,1]");
        if (p_.size() != q_.size()) fail(ErrorKind::domain, "mixture profiles must have equal length");
    }

    [[nodiscard]] std::size_t n() const override { return p_.size(); }
    [[nodiscard]] double eps() const { return eps_; }
    [[nodiscard]] const BernoulliProfile& p() const { return p_; }
    [[nodiscard]] const BernoulliProfile& q() const { return q_; }

    [[nodiscard]] double joint(IndexSet s) const override {
        double a = 1.0, b = 1.0;
        for (std::size_t i : s) {
            a *= p_[i];
            b *= q_[i];
        }
        return (1.0 - eps_) * a + eps_ * b;
    }

    [[nodiscard]] std::optional<SymmetricSums> fast_sums(std::size_t k_max, bool high_precision,
                                                         const std::vector<bool>& keep = {}) const override {
        const auto sp = detail::restricted_sums(p_.probs(), keep, k_max, high_precision);
        const auto sq = detail::restricted_sums(q_.probs(), keep, k_max, high_precision);
        SymmetricSums out;
        out.values.resize(k_max + 1);
        for (std::size_t k = 0; k <= k_max; ++k) out.values[k] = (1.0 - eps_) * sp.values[k] + eps_ * sq.values[k];
        if (high_precision) {
            const Rational e(eps_);
            const Rational one_minus = Rational(1) - e;
            std::vector<Rational> ex(k_max + 1);
            for (std::size_t k = 0; k <= k_max; ++k) ex[k] = one_minus * (*sp.exact)[k] + e * (*sq.exact)[k];
            out.exact = std::move(ex);
        }
        return out;
    }

    /// (1-eps) PB(p) + eps PB(q), mixed in log space.
    [[nodiscard]] Pmf closed_form_pmf() const {
        const Pmf a = pmf_dp(p_);
        const Pmf b = pmf_dp(q_);
        const double la = numeric::safe_log(1.0 - eps_);
        const double lb = numeric::safe_log(eps_);
        Pmf out;
        out.n = n();
        out.provenance = Provenance::mixture_closed_form;
        out.log_probs.resize(n() + 1);
        for (std::size_t k = 0; k <= n(); ++k) out.log_probs[k] = numeric::log_add(la + a.log_probs[k], lb + b.log_probs[k]);
        return out;
    }

private:
    double eps_;
    BernoulliProfile p_;
    BernoulliProfile q_;
};

/// Arbitrary joint evaluator; symmetric sums are found by enumeration.
class FunctionModel final : public DependentModel {
public:
    FunctionModel(std::size_t n, std::function<double(IndexSet)> joint) : n_(n), joint_(std::move(joint)) {}

    [[nodiscard]] std::size_t n() const override { return n_; }
    [[nodiscard]] double joint(IndexSet s) const override { return joint_(s); }

private:
    std::size_t n_;
    std::function<double(IndexSet)> joint_;
};

inline constexpr std::size_t enumeration_max_n = 25;

/// S~_0..S~_{k_max}: closed form when the model offers one, otherwise a sum
/// of joint over every k-subset (n <= 25).
inline SymmetricSums s_tilde(const DependentModel& model, std::size_t k_max, bool high_precision = false) {
    const std::size_t n = model.n();
    if (k_max > n) fail(ErrorKind::domain, "s_tilde: k_max exceeds n");
    if (auto fast = model.fast_sums(k_max, high_precision)) return *std::move(fast);
    if (n > enumeration_max_n)
        fail(ErrorKind::size, "s_tilde: generic enumeration needs n <= " + std::to_string(enumeration_max_n));

    const auto all = detail::iota_indices(n);
    SymmetricSums out;
    out.values.assign(k_max + 1, 0.0);
    std::vector<Rational> ex;
    if (high_precision) ex.assign(k_max + 1, Rational(0));
    for (std::size_t k = 0; k <= k_max; ++k) {
        numeric::CompensatedSum acc;
        detail::for_each_combination(all, k, [&](IndexSet s) {
            const double v = model.joint(s);
            acc += v;
            if (high_precision) ex[k] += Rational(v);
        });
        out.values[k] = acc.value();
    }
    if (high_precision) out.exact = std::move(ex);
    return out;
}

/// Whole distribution of V~_n by inclusion-exclusion over S~.
inline Pmf pmf_dependent(const DependentModel& model, Precision precision = Precision::floating) {
    const auto sums = s_tilde(model, model.n(), precision == Precision::rational);
    return pmf_inclusion_exclusion(sums, model.n());
}

/// P(V~_n = k) by inclusion-exclusion over S~.
inline double pmf_dependent(const DependentModel& model, std::size_t k, Precision precision = Precision::floating) {
    const auto sums = s_tilde(model, model.n(), precision == Precision::rational);
    return pmf_inclusion_exclusion(sums, k, model.n());
}

/// Rare collection I_k(n) of index sets excluded from the ratio condition.
class RareSetSpec {
public:
    enum class Kind { empty, contains_any, explicit_list };

    static RareSetSpec empty() { return {}; }

    /// Every tuple that meets J.
    static RareSetSpec contains_any(std::vector<std::size_t> j) {
        RareSetSpec r;
        r.kind_ = Kind::contains_any;
        std::sort(j.begin(), j.end());
        j.erase(std::unique(j.begin(), j.end()), j.end());
        r.hit_ = std::move(j);
        return r;
    }

    /// Exactly the listed tuples (any sizes).
    static RareSetSpec explicit_list(std::vector<std::vector<std::size_t>> tuples) {
        RareSetSpec r;
        r.kind_ = Kind::explicit_list;
        for (auto& t : tuples) {
            std::sort(t.begin(), t.end());
            r.list_.insert(std::move(t));
        }
        return r;
    }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const std::vector<std::size_t>& hit_set() const { return hit_; }
    [[nodiscard]] const std::set<std::vector<std::size_t>>& tuples() const { return list_; }

    [[nodiscard]] bool contains(IndexSet tuple) const {
        switch (kind_) {
            case Kind::empty: return false;
            case Kind::contains_any:
                return std::any_of(tuple.begin(), tuple.end(),
                                   [&](std::size_t i) { return std::binary_search(hit_.begin(), hit_.end(), i); });
            case Kind::explicit_list: return list_.count(std::vector<std::size_t>(tuple.begin(), tuple.end())) > 0;
        }
        return false;
    }

private:
    Kind kind_ = Kind::empty;
    std::vector<std::size_t> hit_;
    std::set<std::vector<std::size_t>> list_;
};

enum class EnumerationMode { exhaustive, sampled };

struct SchemeRow {
    std::size_t k = 0;
    EnumerationMode mode = EnumerationMode::exhaustive;
    std::size_t tuples_examined = 0;  ///< outside the rare set
    std::size_t zero_product = 0;     ///< tuples with prod b = 0, counted as infinite deviation
    double b1_max_dev = 0.0;          ///< max |b~ / prod b - 1| over examined tuples
    double b2_ratio = 1.0;            ///< S~_k / sum over I^c of b~
    double b3_ratio = 1.0;            ///< S_k / sum over I^c of prod b
};

struct SchemeDiagnostics {
    std::vector<SchemeRow> rows;  ///< k = 1..k_max
    std::uint64_t seed = 0;
    std::size_t sample_budget = 0;
    double b1_max_dev = 0.0;  ///< max over k
    double b2_max_dev = 0.0;  ///< max over k of |b2_ratio - 1|
    double b3_max_dev = 0.0;
    bool any_sampled = false;
    bool flagged = false;     ///< some prod b = 0 outside the rare set
};

inline constexpr double exhaustive_tuple_limit = 1e6;

namespace detail {

/// Uniform random k-subset of {0..n-1} (Floyd), returned sorted.
template <typename Rng>
std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, Rng& rng) {
    std::set<std::size_t> chosen;
    for (std::size_t j = n - k; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

inline std::mt19937_64 shard_rng(std::uint64_t seed, std::size_t shard) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(shard)};
    return std::mt19937_64(seq);
}

inline double ratio_or_inf(double num, double den) {
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Per-k statistics behind the rare-set conditions, for k = 1..k_max.
/// b~/prod b is examined over every tuple outside I_k when C(n,k) <= 1e6 and
/// over `sample_budget` distinct uniformly drawn tuples otherwise (seeded
/// per k from `seed`). The complement sums for the B2/B3 ratios are always
/// exact: an empty rare set gives 1, contains_any uses restricted symmetric
/// sums, and an explicit list subtracts the listed tuples.
inline SchemeDiagnostics check_scheme(const DependentModel& model, const BernoulliProfile& indep,
                                      const RareSetSpec& rare, std::size_t k_max, std::size_t sample_budget,
                                      std::uint64_t seed) {
    const std::size_t n = model.n();
    if (indep.size() != n) fail(ErrorKind::domain, "independent profile length differs from model n");
    if (k_max > n) fail(ErrorKind::domain, "check_scheme: k_max exceeds n");

    SchemeDiagnostics out;
    out.seed = seed;
    out.sample_budget = sample_budget;

    const auto tilde = s_tilde(model, k_max);
    const auto indep_sums = elementary_symmetric(indep.probs(), k_max);
    const auto all = detail::iota_indices(n);

    std::vector<bool> keep;
    std::optional<SymmetricSums> tilde_kept, indep_kept;
    if (rare.kind() == RareSetSpec::Kind::contains_any) {
        keep.assign(n, true);
        for (std::size_t j : rare.hit_set())
            if (j < n) keep[j] = false;
        tilde_kept = model.fast_sums(k_max, false, keep);
        indep_kept = detail::restricted_sums(indep.probs(), keep, k_max, false);
    }

    for (std::size_t k = 1; k <= k_max; ++k) {
        SchemeRow row;
        row.k = k;

        auto examine = [&](IndexSet s) {
            if (rare.contains(s)) return;
            const double bt = model.joint(s);
            double prod = 1.0;
            for (std::size_t i : s) prod *= indep[i];
            ++row.tuples_examined;
            if (prod > 0.0) {
                row.b1_max_dev = std::max(row.b1_max_dev, std::abs(bt / prod - 1.0));
            } else {
                ++row.zero_product;
                row.b1_max_dev = std::numeric_limits<double>::infinity();
            }
        };

        if (detail::binomial_count(n, k) <= exhaustive_tuple_limit) {
            row.mode = EnumerationMode::exhaustive;
            detail::for_each_combination(all, k, examine);
        } else {
            row.mode = EnumerationMode::sampled;
            out.any_sampled = true;
            auto rng = detail::shard_rng(seed, k);
            std::set<std::vector<std::size_t>> seen;
            std::size_t attempts = 0;
            while (seen.size() < sample_budget && attempts < 50 * sample_budget + 100) {
                ++attempts;
                auto t = detail::random_subset(n, k, rng);
                if (seen.insert(t).second) examine(t);
            }
        }

        switch (rare.kind()) {
            case RareSetSpec::Kind::empty:
                row.b2_ratio = 1.0;
                row.b3_ratio = 1.0;
                break;
            case RareSetSpec::Kind::contains_any: {
                double tilde_c = 0.0;
                if (tilde_kept) {
                    tilde_c = tilde_kept->values[k];
                } else {
                    std::vector<std::size_t> pool;
                    for (std::size_t i = 0; i < n; ++i)
                        if (keep[i]) pool.push_back(i);
                    numeric::CompensatedSum acc;
                    detail::for_each_combination(pool, k, [&](IndexSet s) { acc += model.joint(s); });
                    tilde_c = acc.value();
                }
                row.b2_ratio = detail::ratio_or_inf(tilde.values[k], tilde_c);
                row.b3_ratio = detail::ratio_or_inf(indep_sums.values[k], indep_kept->values[k]);
                break;
            }
            case RareSetSpec::Kind::explicit_list: {
                double rare_tilde = 0.0, rare_prod = 0.0;
                for (const auto& t : rare.tuples()) {
                    if (t.size() != k) continue;
                    rare_tilde += model.joint(t);
                    double prod = 1.0;
                    for (std::size_t i : t) prod *= indep[i];
                    rare_prod += prod;
                }
                row.b2_ratio = detail::ratio_or_inf(tilde.values[k], tilde.values[k] - rare_tilde);
                row.b3_ratio = detail::ratio_or_inf(indep_sums.values[k], indep_sums.values[k] - rare_prod);
                break;
            }
        }

        out.b1_max_dev = std::max(out.b1_max_dev, row.b1_max_dev);
        out.b2_max_dev = std::max(out.b2_max_dev, std::abs(row.b2_ratio - 1.0));
        out.b3_max_dev = std::max(out.b3_max_dev, std::abs(row.b3_ratio - 1.0));
        out.flagged = out.flagged || row.zero_product > 0;
        out.rows.push_back(row);
    }
    return out;
}

struct RatioRow {
    std::size_t k = 0;
    double dependent = 0.0;
    double independent = 0.0;
    double ratio = 0.0;
    bool defined = false;  ///< false when P(V = k) = 0
};

/// P(V~_n = k) / P(V_n = k) for k = 0..k_max.
inline std::vector<RatioRow> ratio_report(const DependentModel& model, const BernoulliProfile& indep,
                                          std::size_t k_max, Precision precision = Precision::floating) {
    const std::size_t n = model.n();
    if (indep.size() != n) fail(ErrorKind::domain, "independent profile length differs from model n");
    if (k_max > n) fail(ErrorKind::domain, "ratio_report: k_max exceeds n");
    const auto sums = s_tilde(model, n, precision == Precision::rational);
    const Pmf base = pmf_dp(indep, k_max);
    std::vector<RatioRow> rows;
    for (std::size_t k = 0; k <= k_max; ++k) {
        RatioRow r;
        r.k = k;
        r.dependent = pmf_inclusion_exclusion(sums, k, n);
        r.independent = base.prob(k);
        r.defined = r.independent > 0.0;
        r.ratio = r.defined ? r.dependent / r.independent : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(r);
    }
    return rows;
}

}  // namespace pblab
