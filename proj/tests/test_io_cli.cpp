#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "pblab/cli.hpp"

using namespace pblab;
using Catch::Approx;
using json = nlohmann::json;

namespace {

const std::string cli = PBLAB_CLI_PATH;
const std::string samples = PBLAB_SAMPLES_DIR;

struct Run {
    int code = -1;
    std::string out;
};

Run run_cli(const std::string& args) {
    Run r;
    const std::string cmd = cli + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

int guarded(const json& j, std::string* out = nullptr, std::string* err = nullptr) {
    std::ostringstream o, e;
    const int code = cli::run_guarded(j, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return code;
}

std::filesystem::path temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "pblab_cli_test";
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("number formatting", "[io]") {
    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(io::format_double(1.0) == "1");
    CHECK(io::format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    const json j = {{"a", 0.5}, {"b", -std::numeric_limits<double>::infinity()}, {"c", {1, 2}}};
    CHECK(io::dump_json(j, -1) == "{\"a\":0.5,\"b\":null,\"c\":[1,2]}\n");
}

TEST_CASE("spec string parsing", "[io]") {
    CHECK(io::parse_family("row_power:1,0.75").kind == ProfileFamily::Kind::row_power);
    CHECK(io::to_spec(io::parse_family("index_power:0.5,0.5")) == "index_power:0.5,0.5");
    CHECK_THROWS_AS(io::parse_family("bogus:1"), Error);
    CHECK_THROWS_AS(io::parse_family("row_power:1"), Error);
    CHECK(io::parse_window("constant:1").k_limit(3, 0.6) == 1);
    CHECK(io::parse_kind("poisson-limit:2").lambda == 2.0);
    CHECK(io::parse_kind("beta").tag == ApproxKind::Tag::beta_form);
    CHECK_THROWS_AS(io::parse_kind("gamma"), Error);
    const auto rare = io::parse_rare("contains_any:1");
    CHECK(rare.contains(std::vector<std::size_t>{0, 2}));
    CHECK_FALSE(rare.contains(std::vector<std::size_t>{1, 2}));
}

TEST_CASE("model files", "[io]") {
    const auto m = io::load_model(samples + "/mixture.json");
    CHECK(m->n() == 2);
    CHECK(pmf_dependent(*m, 0) == Approx(0.5).epsilon(1e-14));
    CHECK(io::load_model(samples + "/product.json")->n() == 3);
    CHECK_THROWS_AS(io::model_from_json(json{{"kind", "product"}, {"p", {0.1}}, {"extra", 1}}), Error);
    CHECK_THROWS_AS(io::model_from_json(json{{"kind", "markov"}}), Error);
}

TEST_CASE("atomic write leaves no temporary", "[io]") {
    const auto path = temp_dir() / "atomic.txt";
    io::write_atomic(path, "hello\n");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "hello");
    auto tmp = path;
    tmp += ".tmp";
    CHECK_FALSE(std::filesystem::exists(tmp));
}

TEST_CASE("config validation and exit codes", "[cli]") {
    const std::string prof = samples + "/profile.txt";
    CHECK(guarded({{"command", "pmf"}, {"profile", prof}}) == 0);
    CHECK(guarded({{"command", "verify"}, {"profile", prof}, {"kind", "beta"}, {"beta_cap", 1.5}}) == 2);
    CHECK(guarded({{"command", "pmf"}, {"profile", prof}, {"colour", "red"}}) == 2);
    CHECK(guarded({{"command", "pmf"}}) == 2);
    CHECK(guarded({{"command", "launch"}}) == 2);
    CHECK(guarded({{"command", "pmf"}, {"family", "constant_p:0.1"}}) == 2);
    CHECK(guarded({{"command", "sweep"}, {"family", "constant_p:0.1"}, {"grid", "10,100"}, {"kind", "beta"}}) == 2);
    CHECK(guarded({{"command", "verify"}, {"family", "constant_p:0.1"}, {"n", 10}, {"kind", "normal"}}) == 2);
    CHECK(guarded({{"command", "conditions"}, {"family", "constant_p:0.1"}, {"grid", "100,10"}}) == 2);

    std::string err;
    CHECK(guarded({{"command", "verify"}, {"family", "constant_p:0.6"}, {"n", 10}, {"kind", "poisson"}}, nullptr,
                  &err) == 3);
    const auto obj = json::parse(err);
    CHECK(obj["error"]["kind"] == "hypothesis");
    CHECK(obj["error"]["exit_code"] == 3);

    CHECK(guarded({{"command", "pmf"}, {"family", "constant_p:1.2"}, {"n", 3}}) == 3);
    CHECK(guarded({{"command", "pmf"}, {"family", "constant_p:0.6"}, {"n", 60}, {"engine", "ie"}}) == 4);
    CHECK(guarded({{"command", "pmf"}, {"family", "constant_p:0.6"}, {"n", 60}, {"engine", "ie"},
                   {"precision", "rational"}}) == 0);
}

TEST_CASE("pmf command emits the CSV rows", "[cli]") {
    const auto r = run_cli("pmf --profile " + samples + "/profile.txt --engine dp");
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "k,prob,log_prob");
    const std::vector<double> want{0.504, 0.398, 0.092, 0.006};
    for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(std::getline(in, line));
        std::istringstream row(line);
        std::string kk, prob;
        std::getline(row, kk, ',');
        std::getline(row, prob, ',');
        CHECK(std::stoul(kk) == k);
        CHECK(std::stod(prob) == Approx(want[k]).margin(1e-15));
    }
}

TEST_CASE("binary reports exit codes", "[cli]") {
    CHECK(run_cli("verify --profile " + samples + "/profile.txt --kind beta --beta-cap 1.5").code == 2);
    CHECK(run_cli("pmf --profile /nonexistent.txt").code == 2);
    CHECK(run_cli("pmf --family constant_p:0.3 --n 3 --bogus 1").code == 2);
    CHECK(run_cli("verify --family constant_p:0.6 --n 10 --kind poisson").code == 3);
    CHECK(run_cli("pmf --family constant_p:0.6 --n 60 --engine ie").code == 4);
}

TEST_CASE("identical configs give byte-identical JSON", "[cli]") {
    const std::string args = "dependent --model " + samples + "/mixture.json --profile " + samples +
                             "/indep.txt --format json --seed 5";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const auto j = json::parse(a.out);
    CHECK(j["pmf"][0].get<double>() == Approx(0.5).epsilon(1e-14));
    CHECK(j["ratio_report"][2]["ratio"].get<double>() == Approx(0.10 / 0.09).epsilon(1e-12));

    const auto v1 = run_cli("verify --config " + samples + "/verify_poisson.json --bracket composed");
    const auto v2 = run_cli("verify --config " + samples + "/verify_poisson.json --bracket composed");
    REQUIRE(v1.code == 0);
    CHECK(v1.out == v2.out);
    CHECK(json::parse(v1.out)["summary"]["violations"] == 0);
}

TEST_CASE("flags override config keys", "[cli]") {
    const auto r = run_cli("verify --config " + samples + "/verify_poisson.json --format csv --kind lambda");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("k,exact,approx,ratio,lower_env,upper_env,valid", 0) == 0);
}

TEST_CASE("output files and per-point sweep files", "[cli]") {
    const auto dir = temp_dir();
    const auto out = dir / "sweep.csv";
    std::filesystem::remove(out);
    const auto r = run_cli("sweep --config " + samples + "/sweep_lambda.json --grid 100,1000 --out " + out.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    CHECK(std::filesystem::exists(out));
    CHECK(std::filesystem::exists(dir / "sweep.n100.csv"));
    CHECK(std::filesystem::exists(dir / "sweep.n1000.csv"));

    const auto bad = dir / "never.json";
    std::filesystem::remove(bad);
    CHECK(run_cli("verify --family constant_p:0.6 --n 10 --kind poisson --out " + bad.string()).code == 3);
    CHECK_FALSE(std::filesystem::exists(bad));
}

TEST_CASE("remaining commands run", "[cli]") {
    CHECK(run_cli("approx --profile " + samples + "/profile.txt --kind normal").code == 0);
    CHECK(run_cli("distance --family row_power:1,0.3333333333333333 --n 1000 --format json").code == 0);
    CHECK(run_cli("conditions --family row_power:1,0.75 --grid 16,256,4096 --format json").code == 0);
    CHECK(run_cli("dependent --model " + samples + "/product.json --rare contains_any:1").code == 0);
    CHECK(run_cli("pmf --family constant_p:0.2 --n 20 --engine brute --k-max 5").code == 0);
}
