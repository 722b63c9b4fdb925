#pragma once

// Text formats: "kind:params" specs for families, windows and approximants;
// model JSON files; fixed-precision CSV/JSON emission; atomic file writes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pblab/asymptotics.hpp"
#include "pblab/dependent.hpp"
#include "pblab/error.hpp"
#include "pblab/profiles.hpp"

namespace pblab::io {

using json = nlohmann::json;

/// 17 significant digits; non-finite values spelled inf / -inf / nan.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void dump(const json& j, std::string& out, int indent, int depth) {
    const auto pad = [&](int d) {
        if (indent >= 0) {
            out += '\n';
            out.append(static_cast<std::size_t>(d * indent), ' ');
        }
    };
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                pad(depth + 1);
                out += json(it.key()).dump();
                out += indent >= 0 ? ": " : ":";
                dump(it.value(), out, indent, depth + 1);
            }
            pad(depth);
            out += '}';
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ',';
                first = false;
                pad(depth + 1);
                dump(v, out, indent, depth + 1);
            }
            pad(depth);
            out += ']';
            return;
        }
        case json::value_t::number_float: {
            const double v = j.get<double>();
            out += std::isfinite(v) ? format_double(v) : "null";
            return;
        }
        default: out += j.dump(); return;
    }
}

}  // namespace detail

/// JSON text with every float at 17 significant digits (non-finite as null),
/// so identical inputs give byte-identical files.
inline std::string dump_json(const json& j, int indent = 2) {
    std::string out;
    detail::dump(j, out, indent, 0);
    out += '\n';
    return out;
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::config, "cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) fail(ErrorKind::config, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        fail(ErrorKind::config, "cannot rename into " + path.string() + ": " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// spec strings

inline std::vector<double> parse_numbers(std::string_view text, std::string_view what) {
    std::vector<double> out;
    std::string s(text);
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            fail(ErrorKind::config, "cannot parse number '" + tok + "' in " + std::string(what));
        }
    }
    return out;
}

inline std::pair<std::string, std::string> split_spec(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) return {std::string(spec), {}};
    return {std::string(spec.substr(0, colon)), std::string(spec.substr(colon + 1))};
}

/// constant_total:c | constant_p:p | row_power:c,a | index_power:c,a | file:path
inline ProfileFamily parse_family(std::string_view spec) {
    const auto [kind, rest] = split_spec(spec);
    if (kind == "file" || kind == "from_file") {
        if (rest.empty()) fail(ErrorKind::config, "family file: needs a path");
        return ProfileFamily::from_file(rest);
    }
    const auto v = parse_numbers(rest, "family spec");
    const auto need = [&](std::size_t c) {
        if (v.size() != c) fail(ErrorKind::config, "family " + kind + " takes " + std::to_string(c) + " parameter(s)");
    };
    if (kind == "constant_total") { need(1); return ProfileFamily::constant_total(v[0]); }
    if (kind == "constant_p") { need(1); return ProfileFamily::constant_p(v[0]); }
    if (kind == "row_power") { need(2); return ProfileFamily::row_power(v[0], v[1]); }
    if (kind == "index_power") { need(2); return ProfileFamily::index_power(v[0], v[1]); }
    fail(ErrorKind::config, "unknown family kind '" + kind + "'");
}

inline std::string to_spec(const ProfileFamily& f) {
    std::string out;
    switch (f.kind) {
        case ProfileFamily::Kind::constant_total: out = "constant_total:"; break;
        case ProfileFamily::Kind::constant_p: out = "constant_p:"; break;
        case ProfileFamily::Kind::row_power: out = "row_power:"; break;
        case ProfileFamily::Kind::index_power: out = "index_power:"; break;
        case ProfileFamily::Kind::from_file: return "file:" + f.path;
    }
    for (std::size_t i = 0; i < f.params.size(); ++i) out += (i ? "," : "") + format_double(f.params[i]);
    return out;
}

/// power:c,a | power_of_lambda:c,a | constant:c
inline GrowthWindow parse_window(std::string_view spec) {
    const auto [kind, rest] = split_spec(spec);
    const auto v = parse_numbers(rest, "window spec");
    GrowthWindow w;
    if (kind == "power" && v.size() == 2) w = GrowthWindow::power(v[0], v[1]);
    else if (kind == "power_of_lambda" && v.size() == 2) w = GrowthWindow::power_of_lambda(v[0], v[1]);
    else if (kind == "constant" && v.size() == 1) w = GrowthWindow::constant(v[0]);
    else fail(ErrorKind::config, "bad window spec '" + std::string(spec) + "'");
    if (!(w.c > 0.0) || !std::isfinite(w.a)) fail(ErrorKind::config, "window needs c > 0");
    return w;
}

inline std::string to_spec(const GrowthWindow& w) {
    switch (w.kind) {
        case GrowthWindow::Kind::power: return "power:" + format_double(w.c) + "," + format_double(w.a);
        case GrowthWindow::Kind::power_of_lambda:
            return "power_of_lambda:" + format_double(w.c) + "," + format_double(w.a);
        case GrowthWindow::Kind::constant: return "constant:" + format_double(w.c);
    }
    return {};
}

/// lambda | beta | poisson | poisson-limit:L | normal
inline ApproxKind parse_kind(std::string_view spec) {
    const auto [kind, rest] = split_spec(spec);
    if (kind == "lambda") return ApproxKind::lambda_form();
    if (kind == "beta") return ApproxKind::beta_form();
    if (kind == "poisson") return ApproxKind::poisson_form();
    if (kind == "normal") return ApproxKind::normal_local();
    if (kind == "poisson-limit") {
        const auto v = parse_numbers(rest, "kind spec");
        if (v.size() != 1 || !(v[0] > 0.0) || !std::isfinite(v[0]))
            fail(ErrorKind::config, "poisson-limit needs one finite lambda > 0");
        return ApproxKind::poisson_limit(v[0]);
    }
    fail(ErrorKind::config, "unknown approximation kind '" + std::string(spec) + "'");
}

/// empty | contains_any:i,j,... (1-based)
inline RareSetSpec parse_rare(std::string_view spec) {
    const auto [kind, rest] = split_spec(spec);
    if (kind == "empty") return RareSetSpec::empty();
    if (kind == "contains_any") {
        std::vector<std::size_t> idx;
        for (double v : parse_numbers(rest, "rare set spec")) {
            if (!(v >= 1.0) || v != std::floor(v)) fail(ErrorKind::config, "rare-set indices are 1-based integers");
            idx.push_back(static_cast<std::size_t>(v) - 1);
        }
        return RareSetSpec::contains_any(std::move(idx));
    }
    fail(ErrorKind::config, "unknown rare set spec '" + std::string(spec) + "'");
}

// ---------------------------------------------------------------------------
// model files

inline std::vector<double> json_probs(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array()) fail(ErrorKind::parse, std::string("model needs array '") + key + "'");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) fail(ErrorKind::parse, std::string("non-numeric entry in '") + key + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

/// {"kind":"mixture","eps":e,"p":[...],"q":[...]} or {"kind":"product","p":[...]}
inline std::unique_ptr<DependentModel> model_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        fail(ErrorKind::parse, "model must be an object with a string 'kind'");
    const auto kind = j["kind"].get<std::string>();
    if (kind == "product") {
        for (const auto& [k, _] : j.items())
            if (k != "kind" && k != "p") fail(ErrorKind::parse, "unknown key '" + k + "' in product model");
        return std::make_unique<ProductModel>(BernoulliProfile(json_probs(j, "p")));
    }
    if (kind == "mixture") {
        for (const auto& [k, _] : j.items())
            if (k != "kind" && k != "p" && k != "q" && k != "eps")
                fail(ErrorKind::parse, "unknown key '" + k + "' in mixture model");
        if (!j.contains("eps") || !j["eps"].is_number()) fail(ErrorKind::parse, "mixture model needs numeric 'eps'");
        return std::make_unique<MixtureModel>(j["eps"].get<double>(), BernoulliProfile(json_probs(j, "p")),
                                              BernoulliProfile(json_probs(j, "q")));
    }
    fail(ErrorKind::parse, "unknown model kind '" + kind + "'");
}

inline std::unique_ptr<DependentModel> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open model file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, path + ": " + e.what());
    }
    return model_from_json(j);
}

// ---------------------------------------------------------------------------
// emission

inline json to_json(const ProfileSummary& s) {
    return {{"n", s.n},           {"lambda_n", s.lambda_n}, {"m_n", s.m_n},   {"alpha_n", s.alpha_n},
            {"beta_n", s.beta_n}, {"sum_sq", s.sum_sq},     {"var_n", s.var_n}};
}

inline std::string pmf_csv(const Pmf& pmf) {
    std::string out = "k,prob,log_prob\n";
    for (std::size_t k = 0; k < pmf.log_probs.size(); ++k)
        out += std::to_string(k) + "," + format_double(pmf.prob(k)) + "," + format_double(pmf.log_probs[k]) + "\n";
    return out;
}

inline json pmf_json(const Pmf& pmf, const ProfileSummary& s) {
    json rows = json::array();
    for (std::size_t k = 0; k < pmf.log_probs.size(); ++k)
        rows.push_back({{"k", k}, {"prob", pmf.prob(k)}, {"log_prob", pmf.log_probs[k]}});
    return {{"provenance", std::string(to_string(pmf.provenance))},
            {"n", pmf.n},
            {"summary", to_json(s)},
            {"rows", std::move(rows)}};
}

inline std::string envelope_csv(const EnvelopeReport& r) {
    std::string out = "k,exact,approx,ratio,lower_env,upper_env,valid\n";
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        out += std::to_string(r.k_values[i]) + "," + format_double(std::exp(r.log_exact[i])) + "," +
               format_double(std::exp(r.log_approx[i])) + "," + format_double(r.ratios[i]) + "," +
               format_double(r.lower_env[i]) + "," + format_double(r.upper_env[i]) + "," +
               (r.validity_mask[i] ? "1" : "0") + "\n";
    }
    return out;
}

inline json envelope_json(const EnvelopeReport& r) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        rows.push_back({{"k", r.k_values[i]},
                        {"exact", std::exp(r.log_exact[i])},
                        {"approx", std::exp(r.log_approx[i])},
                        {"log_exact", r.log_exact[i]},
                        {"log_approx", r.log_approx[i]},
                        {"ratio", r.ratios[i]},
                        {"lower_env", r.lower_env[i]},
                        {"upper_env", r.upper_env[i]},
                        {"valid", static_cast<bool>(r.validity_mask[i])}});
    }
    json summary = {{"kind", std::string(to_string(r.kind.tag))},
                    {"window", to_spec(r.window)},
                    {"phi", r.phi},
                    {"k_max", r.k_values.empty() ? 0 : r.k_values.back()},
                    {"max_abs_dev", r.max_abs_dev},
                    {"violations", r.violations},
                    {"margin", r.margin}};
    if (r.beta_cap) summary["beta_cap"] = *r.beta_cap;
    return {{"summary", std::move(summary)}, {"profile", to_json(r.summary)}, {"rows", std::move(rows)}};
}

inline json conditions_json(const ConditionReport& c) {
    json rows = json::array();
    for (const auto& r : c.rows)
        rows.push_back({{"n", r.n},
                        {"m_n", r.summary.m_n},
                        {"lambda_n", r.summary.lambda_n},
                        {"sum_sq", r.summary.sum_sq},
                        {"phi", r.phi},
                        {"phi_times_m", r.phi_times_m},
                        {"phi_over_lambda", r.phi_over_lambda}});
    const auto verdict = [](const TrendVerdict& v) {
        return json{{"decreasing", v.decreasing}, {"below_threshold", v.below_threshold}, {"holds", v.holds()}};
    };
    return {{"rows", std::move(rows)},
            {"threshold", c.threshold},
            {"empirical", true},
            {"verdicts",
             {{"A1_m_to_zero", verdict(c.a1_max_to_zero)},
              {"lambda", {{"divergent", c.lambda.divergent}, {"last_value", c.lambda.last_value}}},
              {"A4_sum_sq_to_zero", verdict(c.a4_sum_sq_to_zero)},
              {"phi_m_to_zero", verdict(c.window_phi_m)},
              {"phi_over_lambda_to_zero", verdict(c.window_phi_lambda)}}}};
}

inline std::string conditions_csv(const ConditionReport& c) {
    std::string out = "n,m_n,lambda_n,sum_sq,phi,phi_times_m,phi_over_lambda\n";
    for (const auto& r : c.rows)
        out += std::to_string(r.n) + "," + format_double(r.summary.m_n) + "," + format_double(r.summary.lambda_n) +
               "," + format_double(r.summary.sum_sq) + "," + format_double(r.phi) + "," +
               format_double(r.phi_times_m) + "," + format_double(r.phi_over_lambda) + "\n";
    return out;
}

inline json scheme_json(const SchemeDiagnostics& d) {
    json rows = json::array();
    for (const auto& r : d.rows)
        rows.push_back({{"k", r.k},
                        {"mode", r.mode == EnumerationMode::exhaustive ? "exhaustive" : "sampled"},
                        {"tuples_examined", r.tuples_examined},
                        {"zero_product", r.zero_product},
                        {"b1_max_dev", r.b1_max_dev},
                        {"b2_ratio", r.b2_ratio},
                        {"b3_ratio", r.b3_ratio}});
    return {{"b1_max_dev", d.b1_max_dev}, {"b2_max_dev", d.b2_max_dev}, {"b3_max_dev", d.b3_max_dev},
            {"any_sampled", d.any_sampled}, {"flagged", d.flagged},       {"seed", d.seed},
            {"sample_budget", d.sample_budget}, {"rows", std::move(rows)}};
}

}  // namespace pblab::io
