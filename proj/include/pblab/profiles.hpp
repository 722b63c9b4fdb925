#pragma once

// Rows of a triangular Bernoulli array, parametric families of rows indexed
// by n, growth windows, and the summary statistics every theorem is phrased in.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "pblab/error.hpp"
#include "pblab/numeric.hpp"

namespace pblab {

/// Success probabilities b(1;n), ..., b(n;n) of one row. Entries lie in [0,1);
/// a sure success (p = 1) is rejected because it makes ln(1-p) and p/(1-p)
/// infinite.
class BernoulliProfile {
public:
    explicit BernoulliProfile(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) fail(ErrorKind::size, "profile must contain at least one probability");
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            const double p = probs_[i];
            if (!(p >= 0.0 && p < 1.0)) {
                std::ostringstream os;
                os.precision(17);
                os << "probability " << p << " at index " << i + 1 << " is outside [0,1)";
                fail(ErrorKind::range, os.str());
            }
        }
    }

    [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
    [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }

    friend bool operator==(const BernoulliProfile&, const BernoulliProfile&) = default;

private:
    std::vector<double> probs_;
};

struct ProfileSummary {
    std::size_t n = 0;
    double lambda_n = 0.0;  ///< sum of b
    double m_n = 0.0;       ///< max of b
    double alpha_n = 0.0;   ///< sum of ln(1-b)
    double beta_n = 0.0;    ///< sum of b/(1-b)
    double sum_sq = 0.0;    ///< sum of b^2
    double var_n = 0.0;     ///< sum of b(1-b), the variance of the row sum

    friend bool operator==(const ProfileSummary&, const ProfileSummary&) = default;
};

/// Sums are accumulated over the entries in sorted order, so the summary is
/// bitwise independent of the input ordering.
inline ProfileSummary summarize(const BernoulliProfile& profile) {
    std::vector<double> sorted(profile.probs().begin(), profile.probs().end());
    std::sort(sorted.begin(), sorted.end());
    ProfileSummary s;
    s.n = sorted.size();
    for (double p : sorted) {
        s.lambda_n += p;
        s.alpha_n += numeric::log1m(p);
        s.beta_n += p / (1.0 - p);
        s.sum_sq += p * p;
        s.var_n += p * (1.0 - p);
    }
    s.m_n = sorted.back();
    return s;
}

/// Parametric triangular array. Parameters are validated when a row is
/// generated, not when the family is built.
struct ProfileFamily {
    enum class Kind { constant_total, constant_p, row_power, index_power, from_file };

    Kind kind = Kind::constant_p;
    std::vector<double> params;
    std::string path;

    /// b(i;n) = c/n
    static ProfileFamily constant_total(double c) { return {Kind::constant_total, {c}, {}}; }
    /// b(i;n) = p
    static ProfileFamily constant_p(double p) { return {Kind::constant_p, {p}, {}}; }
    /// b(i;n) = c n^-a
    static ProfileFamily row_power(double c, double a) { return {Kind::row_power, {c, a}, {}}; }
    /// b(i;n) = c i^-a
    static ProfileFamily index_power(double c, double a) { return {Kind::index_power, {c, a}, {}}; }
    /// Fixed row read from a profile file; only its own length can be generated.
    static ProfileFamily from_file(std::string path) { return {Kind::from_file, {}, std::move(path)}; }
};

BernoulliProfile load_profile(const std::string& path);

inline BernoulliProfile generate(const ProfileFamily& family, std::size_t n) {
    if (n < 1) fail(ErrorKind::size, "generate: n must be at least 1");
    if (family.kind == ProfileFamily::Kind::from_file) {
        BernoulliProfile p = load_profile(family.path);
        if (p.size() != n)
            fail(ErrorKind::size, "profile file " + family.path + " has " + std::to_string(p.size()) +
                                      " entries, requested n = " + std::to_string(n));
        return p;
    }
    const auto& a = family.params;
    const std::size_t want = family.kind == ProfileFamily::Kind::row_power ||
                                     family.kind == ProfileFamily::Kind::index_power
                                 ? 2
                                 : 1;
    if (a.size() != want) fail(ErrorKind::config, "family expects " + std::to_string(want) + " parameter(s)");

    const double nn = static_cast<double>(n);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double idx = static_cast<double>(i + 1);
        double v = 0.0;
        switch (family.kind) {
            case ProfileFamily::Kind::constant_total: v = a[0] / nn; break;
            case ProfileFamily::Kind::constant_p: v = a[0]; break;
            case ProfileFamily::Kind::row_power: v = a[0] * std::pow(nn, -a[1]); break;
            case ProfileFamily::Kind::index_power: v = a[0] * std::pow(idx, -a[1]); break;
            case ProfileFamily::Kind::from_file: break;
        }
        if (!(v >= 0.0 && v < 1.0)) {
            std::ostringstream os;
            os.precision(17);
            os << "family yields b(" << i + 1 << ";" << n << ") = " << v << ", outside [0,1)";
            fail(ErrorKind::range, os.str());
        }
        probs[i] = v;
    }
    return BernoulliProfile(std::move(probs));
}

/// One decimal probability per line; '#' comments and blank lines ignored.
inline BernoulliProfile parse_profile(std::istream& in, const std::string& source = "<stream>") {
    std::vector<double> probs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string_view tok(line.data() + first, last - first + 1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size())
            fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(tok) + "'");
        if (!(v >= 0.0 && v < 1.0))
            fail(ErrorKind::range,
                 source + ":" + std::to_string(line_no) + ": probability " + std::string(tok) + " outside [0,1)");
        probs.push_back(v);
    }
    if (probs.empty()) fail(ErrorKind::size, source + ": profile contains no probabilities");
    return BernoulliProfile(std::move(probs));
}

inline BernoulliProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open profile file " + path);
    return parse_profile(in, path);
}

/// phi(n) defining the window {k : k^2 <= phi(n)}.
struct GrowthWindow {
    enum class Kind { power, power_of_lambda, constant };

    Kind kind = Kind::constant;
    double c = 1.0;
    double a = 0.0;

    /// phi(n) = c n^a
    static GrowthWindow power(double c, double a) { return {Kind::power, c, a}; }
    /// phi(n) = c lambda_n^a
    static GrowthWindow power_of_lambda(double c, double a) { return {Kind::power_of_lambda, c, a}; }
    static GrowthWindow constant(double c) { return {Kind::constant, c, 0.0}; }

    [[nodiscard]] double operator()(std::size_t n, double lambda_n) const {
        double v = 0.0;
        switch (kind) {
            case Kind::power: v = c * std::pow(static_cast<double>(n), a); break;
            case Kind::power_of_lambda: v = c * std::pow(lambda_n, a); break;
            case Kind::constant: v = c; break;
        }
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::domain, "growth window phi(n) must be positive and finite");
        return v;
    }

    /// Largest k with k^2 <= phi, computed exactly in integers.
    [[nodiscard]] std::size_t k_limit(std::size_t n, double lambda_n) const {
        const double phi = (*this)(n, lambda_n);
        auto k = static_cast<std::size_t>(std::floor(std::sqrt(phi)));
        while (static_cast<double>(k + 1) * static_cast<double>(k + 1) <= phi) ++k;
        while (k > 0 && static_cast<double>(k) * static_cast<double>(k) > phi) --k;
        return k;
    }
};

/// Empirical trend of a positive sequence across an n grid. Never a proof of
/// a limit: "holds" means decreasing from first to last grid point and
/// ending below the smallness threshold.
struct TrendVerdict {
    bool decreasing = false;
    bool below_threshold = false;
    [[nodiscard]] bool holds() const { return decreasing && below_threshold; }
};

inline TrendVerdict trend_to_zero(std::span<const double> values, double threshold) {
    TrendVerdict v;
    if (values.size() < 2) return v;
    v.decreasing = values.back() < values.front();
    v.below_threshold = values.back() < threshold;
    return v;
}

struct LambdaTrend {
    bool divergent = false;  ///< strictly increasing with last/first >= growth_factor
    double last_value = 0.0; ///< proxy for lim lambda_n when bounded
};

struct ConditionRow {
    std::size_t n = 0;
    ProfileSummary summary;
    double phi = 0.0;
    double phi_times_m = 0.0;
    double phi_over_lambda = 0.0;
};

struct ConditionReport {
    std::vector<ConditionRow> rows;
    double threshold = 0.1;
    TrendVerdict a1_max_to_zero;      ///< m_n -> 0
    LambdaTrend lambda;               ///< bounded (A2) vs divergent (A3)
    TrendVerdict a4_sum_sq_to_zero;   ///< sum b^2 -> 0
    TrendVerdict window_phi_m;        ///< phi(n) m_n -> 0
    TrendVerdict window_phi_lambda;   ///< phi(n) / lambda_n -> 0
};

/// Recomputes every verdict from the per-n rows.
inline void derive_verdicts(ConditionReport& report, double lambda_growth_factor = 1.5) {
    std::vector<double> m, lam, sq, pm, pl;
    for (const auto& r : report.rows) {
        m.push_back(r.summary.m_n);
        lam.push_back(r.summary.lambda_n);
        sq.push_back(r.summary.sum_sq);
        pm.push_back(r.phi_times_m);
        pl.push_back(r.phi_over_lambda);
    }
    report.a1_max_to_zero = trend_to_zero(m, report.threshold);
    report.a4_sum_sq_to_zero = trend_to_zero(sq, report.threshold);
    report.window_phi_m = trend_to_zero(pm, report.threshold);
    report.window_phi_lambda = trend_to_zero(pl, report.threshold);
    bool increasing = lam.size() >= 2;
    for (std::size_t i = 1; i < lam.size(); ++i) increasing = increasing && lam[i] > lam[i - 1];
    report.lambda.last_value = lam.empty() ? 0.0 : lam.back();
    report.lambda.divergent = increasing && lam.front() > 0.0 && lam.back() >= lambda_growth_factor * lam.front();
}

inline ConditionReport check_conditions(const ProfileFamily& family, std::span<const std::size_t> grid,
                                        const GrowthWindow& window, double threshold = 0.1) {
    if (grid.size() < 2) fail(ErrorKind::config, "condition grid needs at least two n values");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) fail(ErrorKind::config, "condition grid must be strictly increasing");

    ConditionReport report;
    report.threshold = threshold;
    for (std::size_t n : grid) {
        ConditionRow row;
        row.n = n;
        row.summary = summarize(generate(family, n));
        row.phi = window(n, row.summary.lambda_n);
        row.phi_times_m = row.phi * row.summary.m_n;
        row.phi_over_lambda = row.summary.lambda_n > 0.0 ? row.phi / row.summary.lambda_n
                                                         : std::numeric_limits<double>::infinity();
        report.rows.push_back(row);
    }
    derive_verdicts(report);
    return report;
}

}  // namespace pblab
