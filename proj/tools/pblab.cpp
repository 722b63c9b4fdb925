// pblab: exact Poisson-binomial probabilities and Poisson-type local limit
// diagnostics from the command line.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pblab/cli.hpp"

int main(int argc, char** argv) {
    using pblab::cli::json;
    namespace ec = pblab::cli::exit_code;

    CLI::App app{"pblab - Poisson-binomial exact distributions and local limit diagnostics"};
    app.set_version_flag("--version", "pblab 1.0.0");

    std::string command;
    app.add_option("command", command, "pmf | approx | verify | sweep | distance | dependent | conditions")->required();

    // Every string flag lands in the merged config under the same key.
    struct Flag {
        const char* name;
        const char* key;
        const char* help;
        std::string value;
    };
    std::vector<Flag> flags = {
        {"--profile", "profile", "profile file (one probability per line)", {}},
        {"--family", "family", "constant_total:c | constant_p:p | row_power:c,a | index_power:c,a | file:path", {}},
        {"--n", "n", "row length", {}},
        {"--grid", "grid", "comma-separated n grid", {}},
        {"--phi", "phi", "power:c,a | power_of_lambda:c,a | constant:c", {}},
        {"--kind", "kind", "lambda | beta | poisson | poisson-limit:L | normal", {}},
        {"--beta-cap", "beta_cap", "uniform cap beta with m_n <= beta < 1", {}},
        {"--k-max", "k_max", "largest k reported", {}},
        {"--engine", "engine", "dp | dc | brute | ie", {}},
        {"--precision", "precision", "float | rational", {}},
        {"--seed", "seed", "sampling seed", {}},
        {"--out", "out", "output path (default stdout)", {}},
        {"--format", "format", "csv | json", {}},
        {"--model", "model", "dependent model JSON file", {}},
        {"--rare", "rare", "empty | contains_any:i,j (1-based)", {}},
        {"--sample-budget", "sample_budget", "tuples sampled per k when enumeration is too large", {}},
        {"--threshold", "threshold", "smallness threshold for condition trends", {}},
        {"--bracket", "bracket", "stated | composed (poisson-form envelope)", {}},
    };
    std::vector<CLI::Option*> opts;
    for (auto& f : flags) opts.push_back(app.add_option(f.name, f.value, f.help));
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file; flags override its keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << pblab::cli::error_object("config", e.what(), ec::config);
        return ec::config;
    }

    json merged = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << pblab::cli::error_object("config", "cannot open config file " + config_path, ec::config);
            return ec::config;
        }
        try {
            in >> merged;
        } catch (const json::parse_error& e) {
            std::cerr << pblab::cli::error_object("config", e.what(), ec::config);
            return ec::config;
        }
        if (!merged.is_object()) {
            std::cerr << pblab::cli::error_object("config", "config file must hold a JSON object", ec::config);
            return ec::config;
        }
    }
    merged["command"] = command;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (opts[i]->count() > 0) merged[flags[i].key] = flags[i].value;

    return pblab::cli::run_guarded(merged, std::cout, std::cerr);
}
