#pragma once

// Experiment driver behind the pblab command line: configuration parsing and
// validation, command dispatch, output emission, and the exit-code contract.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pblab/asymptotics.hpp"
#include "pblab/dependent.hpp"
#include "pblab/error.hpp"
#include "pblab/exact.hpp"
#include "pblab/io.hpp"
#include "pblab/profiles.hpp"

namespace pblab::cli {

using json = nlohmann::json;

enum class Command { pmf, approx, verify, sweep, distance, dependent, conditions };
enum class Engine { dp, dc, brute, ie };
enum class Format { csv, json };

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int other = 1;
inline constexpr int config = 2;
inline constexpr int hypothesis = 3;
inline constexpr int conditioning = 4;
}  // namespace exit_code

struct ExperimentConfig {
    Command command = Command::pmf;
    std::optional<std::string> profile_path;
    std::optional<ProfileFamily> family;
    std::optional<std::size_t> n;
    std::vector<std::size_t> grid;
    GrowthWindow window = GrowthWindow::power(1.0, 0.5);
    ApproxKind kind = ApproxKind::lambda_form();
    std::optional<double> beta_cap;
    std::optional<std::size_t> k_max;
    Engine engine = Engine::dp;
    Precision precision = Precision::floating;
    std::uint64_t seed = 0;
    std::optional<std::string> out;
    Format format = Format::csv;
    std::optional<std::string> model_path;
    RareSetSpec rare;
    std::size_t sample_budget = 10000;
    double threshold = 0.1;
    PoissonBracket bracket = PoissonBracket::as_stated;
};

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "command", "profile", "family", "n",      "grid",   "phi",   "kind",          "beta_cap",  "k_max",
        "engine",  "precision", "seed", "out",    "format", "model", "rare", "sample_budget", "threshold", "bracket"};
    return keys;
}

namespace detail {

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::config, "config key '" + key + "' has the wrong type");
    }
}

inline std::size_t get_count(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        try {
            std::size_t used = 0;
            const double d = std::stod(s, &used);
            if (used == s.size() && d >= 0 && d == std::floor(d) && d < 1e15) return static_cast<std::size_t>(d);
        } catch (const std::exception&) {
        }
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == std::floor(d) && d < 1e15) return static_cast<std::size_t>(d);
    }
    fail(ErrorKind::config, "config key '" + key + "' must be a nonnegative integer");
}

inline double get_real(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto nums = io::parse_numbers(v.get<std::string>(), key);
        if (nums.size() == 1) return nums[0];
    }
    fail(ErrorKind::config, "config key '" + key + "' must be a number");
}

}  // namespace detail

/// Builds and validates a configuration from a JSON object whose keys are the
/// long flag names (with '-' written as '_'). Unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorKind::config, "configuration must be a JSON object");
    const auto& keys = known_keys();
    for (const auto& [k, _] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(ErrorKind::config, "unknown config key '" + k + "'");

    ExperimentConfig c;
    if (!j.contains("command")) fail(ErrorKind::config, "missing command");
    const auto cmd = detail::get_as<std::string>(j, "command");
    if (cmd == "pmf") c.command = Command::pmf;
    else if (cmd == "approx") c.command = Command::approx;
    else if (cmd == "verify") c.command = Command::verify;
    else if (cmd == "sweep") c.command = Command::sweep;
    else if (cmd == "distance") c.command = Command::distance;
    else if (cmd == "dependent") c.command = Command::dependent;
    else if (cmd == "conditions") c.command = Command::conditions;
    else fail(ErrorKind::config, "unknown command '" + cmd + "'");

    if (j.contains("profile")) c.profile_path = detail::get_as<std::string>(j, "profile");
    if (j.contains("family")) c.family = io::parse_family(detail::get_as<std::string>(j, "family"));
    if (j.contains("n")) {
        c.n = detail::get_count(j, "n");
        if (*c.n < 1) fail(ErrorKind::config, "n must be at least 1");
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.is_string()) {
            for (double v : io::parse_numbers(g.get<std::string>(), "grid")) {
                if (!(v >= 1.0) || v != std::floor(v)) fail(ErrorKind::config, "grid entries must be positive integers");
                c.grid.push_back(static_cast<std::size_t>(v));
            }
        } else if (g.is_array()) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                json wrap = {{"grid", g[i]}};
                c.grid.push_back(detail::get_count(wrap, "grid"));
            }
        } else {
            fail(ErrorKind::config, "grid must be a list or a comma-separated string");
        }
        for (std::size_t i = 0; i < c.grid.size(); ++i) {
            if (c.grid[i] < 1) fail(ErrorKind::config, "grid entries must be positive");
            if (i > 0 && c.grid[i] <= c.grid[i - 1]) fail(ErrorKind::config, "grid must be strictly increasing");
        }
    }
    if (j.contains("phi")) c.window = io::parse_window(detail::get_as<std::string>(j, "phi"));
    if (j.contains("kind")) c.kind = io::parse_kind(detail::get_as<std::string>(j, "kind"));
    if (j.contains("beta_cap")) {
        const double b = detail::get_real(j, "beta_cap");
        if (!(b > 0.0 && b < 1.0)) fail(ErrorKind::config, "beta_cap must lie in (0,1)");
        c.beta_cap = b;
    }
    if (j.contains("k_max")) c.k_max = detail::get_count(j, "k_max");
    if (j.contains("engine")) {
        const auto e = detail::get_as<std::string>(j, "engine");
        if (e == "dp") c.engine = Engine::dp;
        else if (e == "dc") c.engine = Engine::dc;
        else if (e == "brute") c.engine = Engine::brute;
        else if (e == "ie") c.engine = Engine::ie;
        else fail(ErrorKind::config, "unknown engine '" + e + "'");
    }
    if (j.contains("precision")) {
        const auto p = detail::get_as<std::string>(j, "precision");
        if (p == "float") c.precision = Precision::floating;
        else if (p == "rational") c.precision = Precision::rational;
        else fail(ErrorKind::config, "unknown precision '" + p + "'");
    }
    if (j.contains("seed")) c.seed = detail::get_count(j, "seed");
    if (j.contains("out")) c.out = detail::get_as<std::string>(j, "out");
    if (j.contains("format")) {
        const auto f = detail::get_as<std::string>(j, "format");
        if (f == "csv") c.format = Format::csv;
        else if (f == "json") c.format = Format::json;
        else fail(ErrorKind::config, "unknown format '" + f + "'");
    }
    if (j.contains("model")) c.model_path = detail::get_as<std::string>(j, "model");
    if (j.contains("rare")) c.rare = io::parse_rare(detail::get_as<std::string>(j, "rare"));
    if (j.contains("sample_budget")) c.sample_budget = detail::get_count(j, "sample_budget");
    if (j.contains("threshold")) {
        c.threshold = detail::get_real(j, "threshold");
        if (!(c.threshold > 0.0)) fail(ErrorKind::config, "threshold must be positive");
    }
    if (j.contains("bracket")) {
        const auto b = detail::get_as<std::string>(j, "bracket");
        if (b == "stated") c.bracket = PoissonBracket::as_stated;
        else if (b == "composed") c.bracket = PoissonBracket::composed;
        else fail(ErrorKind::config, "bracket must be 'stated' or 'composed'");
    }

    // Cross-field checks.
    const bool single_row = c.command == Command::pmf || c.command == Command::approx ||
                            c.command == Command::verify || c.command == Command::distance;
    if (single_row) {
        if (c.profile_path.has_value() == c.family.has_value())
            fail(ErrorKind::config, "give exactly one of --profile or --family");
        if (c.family && !c.n && c.family->kind != ProfileFamily::Kind::from_file)
            fail(ErrorKind::config, "--family needs --n");
    }
    if (c.command == Command::sweep || c.command == Command::conditions) {
        if (!c.family) fail(ErrorKind::config, "this command needs --family");
        if (c.grid.empty()) fail(ErrorKind::config, "this command needs --grid");
        if (c.command == Command::conditions && c.grid.size() < 2)
            fail(ErrorKind::config, "conditions needs a grid of at least two n values");
    }
    if (c.command == Command::verify || c.command == Command::sweep) {
        const auto t = c.kind.tag;
        if (t != ApproxKind::Tag::lambda_form && t != ApproxKind::Tag::beta_form && t != ApproxKind::Tag::poisson_form)
            fail(ErrorKind::config, "verification supports --kind lambda, beta or poisson");
    }
    if (c.beta_cap && c.kind.tag != ApproxKind::Tag::beta_form)
        fail(ErrorKind::config, "--beta-cap only applies to --kind beta");
    if (c.command == Command::sweep && c.kind.tag == ApproxKind::Tag::beta_form && !c.beta_cap)
        fail(ErrorKind::config, "sweeps with --kind beta need an explicit --beta-cap valid for every n");
    if (c.command == Command::dependent && !c.model_path) fail(ErrorKind::config, "dependent needs a model file");
    return c;
}

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::parse: return exit_code::config;
        case ErrorKind::range:
        case ErrorKind::size:
        case ErrorKind::domain:
        case ErrorKind::hypothesis: return exit_code::hypothesis;
        case ErrorKind::conditioning: return exit_code::conditioning;
    }
    return exit_code::other;
}

inline std::string error_object(std::string_view kind, std::string_view message, int code) {
    json j = {{"error", {{"kind", std::string(kind)}, {"message", std::string(message)}, {"exit_code", code}}}};
    return j.dump() + "\n";
}

namespace detail {

inline BernoulliProfile resolve_profile(const ExperimentConfig& c) {
    if (c.profile_path) return load_profile(*c.profile_path);
    if (c.family->kind == ProfileFamily::Kind::from_file && !c.n) return load_profile(c.family->path);
    return generate(*c.family, *c.n);
}

inline std::size_t threads_allowed() {
    std::size_t t = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PBLAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) t = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return t;
}

struct Sink {
    const ExperimentConfig& config;
    std::ostream& stdout_;

    void emit(const std::string& csv, const json& j) const {
        const std::string text = config.format == Format::csv ? csv : io::dump_json(j);
        if (config.out)
            io::write_atomic(*config.out, text);
        else
            stdout_ << text;
    }

    /// Per-grid-point file next to the aggregate: <stem>.n<N><ext>.
    void emit_point(std::size_t n, const std::string& csv, const json& j) const {
        if (!config.out) return;
        const std::filesystem::path base(*config.out);
        auto name = base.stem().string() + ".n" + std::to_string(n) + (config.format == Format::csv ? ".csv" : ".json");
        io::write_atomic(base.parent_path() / name, config.format == Format::csv ? csv : io::dump_json(j));
    }
};

inline Pmf compute_pmf(const ExperimentConfig& c, const BernoulliProfile& profile) {
    Pmf pmf;
    switch (c.engine) {
        case Engine::dp: return pmf_dp(profile, c.k_max ? std::optional<std::size_t>(std::min(*c.k_max, profile.size())) : std::nullopt);
        case Engine::dc: pmf = pmf_dc(profile); break;
        case Engine::brute: pmf = pmf_bruteforce(profile); break;
        case Engine::ie: {
            const auto sums = elementary_symmetric(profile.probs(), profile.size(), c.precision == Precision::rational);
            pmf = pmf_inclusion_exclusion(sums, profile.size());
            break;
        }
    }
    if (c.k_max && *c.k_max < pmf.support_max()) pmf.log_probs.resize(*c.k_max + 1);
    return pmf;
}

inline void run_pmf(const ExperimentConfig& c, const Sink& sink) {
    const auto profile = resolve_profile(c);
    const auto pmf = compute_pmf(c, profile);
    json j = io::pmf_json(pmf, summarize(profile));
    j["command"] = "pmf";
    sink.emit(io::pmf_csv(pmf), j);
}

inline void run_approx(const ExperimentConfig& c, const Sink& sink) {
    const auto profile = resolve_profile(c);
    const auto s = summarize(profile);
    const std::size_t k_hi = std::min(s.n, c.k_max.value_or(std::min<std::size_t>(s.n, 100)));
    const Pmf exact = pmf_dp(profile, k_hi);
    std::string csv = "k,approx,log_approx,exact,ratio\n";
    json rows = json::array();
    for (std::size_t k = 0; k <= k_hi; ++k) {
        const double la = approx_pmf(c.kind, s, exact.log_probs[0], k);
        const double le = exact.log_probs[k];
        const double ratio = le == numeric::neg_inf ? 0.0 : std::exp(le - la);
        csv += std::to_string(k) + "," + io::format_double(std::exp(la)) + "," + io::format_double(la) + "," +
               io::format_double(std::exp(le)) + "," + io::format_double(ratio) + "\n";
        rows.push_back({{"k", k}, {"approx", std::exp(la)}, {"log_approx", la}, {"exact", std::exp(le)}, {"ratio", ratio}});
    }
    json j = {{"command", "approx"}, {"kind", std::string(to_string(c.kind.tag))}, {"summary", io::to_json(s)}, {"rows", rows}};
    if (c.kind.tag == ApproxKind::Tag::poisson_limit) j["lambda"] = c.kind.lambda;
    sink.emit(csv, j);
}

inline SandwichOptions sandwich_options(const ExperimentConfig& c) {
    SandwichOptions o;
    o.beta_cap = c.beta_cap;
    o.poisson_bracket = c.bracket;
    return o;
}

inline void run_verify(const ExperimentConfig& c, const Sink& sink) {
    const auto profile = resolve_profile(c);
    const auto report = verify_sandwich(profile, c.kind, c.window, sandwich_options(c));
    json j = io::envelope_json(report);
    j["command"] = "verify";
    sink.emit(io::envelope_csv(report), j);
}

inline json distance_block(const BernoulliProfile& profile) {
    const auto s = summarize(profile);
    json j = {{"lambda_n", s.lambda_n}, {"sum_sq", s.sum_sq}};
    const double d = poisson_distance(profile);
    j["D"] = d;
    if (s.sum_sq > 0.0) {
        const double predicted = s.sum_sq / s.lambda_n * numeric::inv_sqrt_2pi_e;
        j["D_asymptotic"] = predicted;
        j["dehpfeif_ratio"] = d / predicted;
    } else {
        j["D_asymptotic"] = nullptr;
        j["dehpfeif_ratio"] = nullptr;
    }
    return j;
}

inline void run_distance(const ExperimentConfig& c, const Sink& sink) {
    const auto profile = resolve_profile(c);
    json j = distance_block(profile);
    j["command"] = "distance";
    j["n"] = profile.size();
    const auto num = [&](const char* k) { return j[k].is_null() ? std::string("nan") : io::format_double(j[k].get<double>()); };
    const std::string csv = "n,lambda_n,sum_sq,D,D_asymptotic,dehpfeif_ratio\n" + std::to_string(profile.size()) + "," +
                            num("lambda_n") + "," + num("sum_sq") + "," + num("D") + "," + num("D_asymptotic") + "," +
                            num("dehpfeif_ratio") + "\n";
    sink.emit(csv, j);
}

inline void run_sweep(const ExperimentConfig& c, const Sink& sink) {
    struct Point {
        std::size_t n = 0;
        EnvelopeReport report;
        json distance;
    };
    const auto opts = sandwich_options(c);
    auto work = [&](std::size_t n) {
        Point p;
        p.n = n;
        const auto profile = generate(*c.family, n);
        p.report = verify_sandwich(profile, c.kind, c.window, opts);
        p.distance = distance_block(profile);
        return p;
    };

    std::vector<Point> points(c.grid.size());
    const std::size_t threads = std::min(threads_allowed(), c.grid.size());
    for (std::size_t start = 0; start < c.grid.size(); start += threads) {
        std::vector<std::future<Point>> batch;
        for (std::size_t i = start; i < std::min(c.grid.size(), start + threads); ++i)
            batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, work, c.grid[i]));
        for (std::size_t i = 0; i < batch.size(); ++i) points[start + i] = batch[i].get();
    }

    std::string csv = "n,k_max,max_abs_dev,violations,D,dehpfeif_ratio\n";
    json rows = json::array();
    for (const auto& p : points) {
        sink.emit_point(p.n, io::envelope_csv(p.report), io::envelope_json(p.report));
        const auto& d = p.distance;
        const std::string ratio = d["dehpfeif_ratio"].is_null() ? "nan" : io::format_double(d["dehpfeif_ratio"].get<double>());
        csv += std::to_string(p.n) + "," + std::to_string(p.report.k_values.back()) + "," +
               io::format_double(p.report.max_abs_dev) + "," + std::to_string(p.report.violations) + "," +
               io::format_double(d["D"].get<double>()) + "," + ratio + "\n";
        rows.push_back({{"n", p.n},
                        {"k_max", p.report.k_values.back()},
                        {"max_abs_dev", p.report.max_abs_dev},
                        {"violations", p.report.violations},
                        {"D", d["D"]},
                        {"dehpfeif_ratio", d["dehpfeif_ratio"]}});
    }
    json j = {{"command", "sweep"},
              {"family", io::to_spec(*c.family)},
              {"kind", std::string(to_string(c.kind.tag))},
              {"window", io::to_spec(c.window)},
              {"rows", rows}};
    if (c.beta_cap) j["beta_cap"] = *c.beta_cap;
    sink.emit(csv, j);
}

inline void run_dependent(const ExperimentConfig& c, const Sink& sink) {
    const auto model = io::load_model(*c.model_path);
    const std::size_t n = model->n();
    const BernoulliProfile indep = c.profile_path ? load_profile(*c.profile_path) : BernoulliProfile(model->marginals());
    if (indep.size() != n) fail(ErrorKind::config, "independent profile length differs from the model");
    const std::size_t k_max = std::min(n, c.k_max.value_or(n));

    const Pmf dep = pmf_dependent(*model, c.precision);
    const auto ratios = ratio_report(*model, indep, k_max, c.precision);
    const auto diag = check_scheme(*model, indep, c.rare, k_max, c.sample_budget, c.seed);
    const auto* mixture = dynamic_cast<const MixtureModel*>(model.get());
    std::optional<Pmf> closed;
    if (mixture) closed = mixture->closed_form_pmf();

    std::string csv = "k,dependent,independent,ratio,closed_form,b1_max_dev,b2_ratio,b3_ratio\n";
    json pmf_rows = json::array();
    for (std::size_t k = 0; k <= k_max; ++k) {
        const auto& r = ratios[k];
        const std::string cf = closed ? io::format_double(closed->prob(k)) : "nan";
        std::string b1 = "nan", b2 = "nan", b3 = "nan";
        if (k >= 1) {
            const auto& d = diag.rows[k - 1];
            b1 = io::format_double(d.b1_max_dev);
            b2 = io::format_double(d.b2_ratio);
            b3 = io::format_double(d.b3_ratio);
        }
        csv += std::to_string(k) + "," + io::format_double(r.dependent) + "," + io::format_double(r.independent) + "," +
               io::format_double(r.ratio) + "," + cf + "," + b1 + "," + b2 + "," + b3 + "\n";
        json row = {{"k", k}, {"dependent", r.dependent}, {"independent", r.independent}, {"defined", r.defined}};
        row["ratio"] = r.defined ? json(r.ratio) : json(nullptr);
        if (closed) row["closed_form"] = closed->prob(k);
        pmf_rows.push_back(row);
    }
    json full = json::array();
    for (std::size_t k = 0; k <= n; ++k) full.push_back(dep.prob(k));
    json j = {{"command", "dependent"},
              {"n", n},
              {"precision", c.precision == Precision::rational ? "rational" : "float"},
              {"pmf", full},
              {"ratio_report", pmf_rows},
              {"diagnostics", io::scheme_json(diag)}};
    sink.emit(csv, j);
}

inline void run_conditions(const ExperimentConfig& c, const Sink& sink) {
    const auto report = check_conditions(*c.family, c.grid, c.window, c.threshold);
    json j = io::conditions_json(report);
    j["command"] = "conditions";
    j["family"] = io::to_spec(*c.family);
    j["window"] = io::to_spec(c.window);
    sink.emit(io::conditions_csv(report), j);
}

}  // namespace detail

/// Runs a validated configuration. Library errors propagate as pblab::Error.
inline void run(const ExperimentConfig& c, std::ostream& out = std::cout) {
    const detail::Sink sink{c, out};
    switch (c.command) {
        case Command::pmf: detail::run_pmf(c, sink); break;
        case Command::approx: detail::run_approx(c, sink); break;
        case Command::verify: detail::run_verify(c, sink); break;
        case Command::sweep: detail::run_sweep(c, sink); break;
        case Command::distance: detail::run_distance(c, sink); break;
        case Command::dependent: detail::run_dependent(c, sink); break;
        case Command::conditions: detail::run_conditions(c, sink); break;
    }
}

/// Parses, validates and runs a merged configuration object, converting
/// every failure into an exit code and a JSON error object on `err`.
inline int run_guarded(const json& merged, std::ostream& out, std::ostream& err) {
    try {
        const auto config = config_from_json(merged);
        run(config, out);
        return exit_code::ok;
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        err << error_object(to_string(e.kind()), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        err << error_object("internal", e.what(), exit_code::other);
        return exit_code::other;
    }
}

}  // namespace pblab::cli
