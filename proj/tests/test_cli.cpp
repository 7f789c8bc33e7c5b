#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdt/cli.hpp"
#include "qdt/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"qdt"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& s : full) argv.push_back(s.c_str());
    return qdt::cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("qdt_cli_" + tag + "_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json manifest_of(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

}  // namespace

TEST_CASE("cli simulate writes dataset, truth, probes and manifest") {
    TempDir tmp("sim");
    const int rc = run_cli({"simulate", "--hilbert-dim", "12", "--outcomes", "4",
                            "--probes", "40", "--seed", "3", "--out-dir", tmp.sub("out")});
    REQUIRE(rc == 0);
    const fs::path out = tmp.path / "out";
    CHECK(fs::exists(out / "probes.csv"));
    CHECK(fs::exists(out / "ground_truth.csv"));
    CHECK(fs::exists(out / "dataset.csv"));

    const json manifest = manifest_of(out);
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("mode") == "diagonal");
    CHECK(manifest.at("config").at("hilbert_dim") == 12);
    for (const auto& item : manifest.at("artifacts").items())
        CHECK(fs::exists(out / item.value().get<std::string>()));

    const qdt::Mat truth = qdt::read_csv(out / "ground_truth.csv");
    CHECK(truth.rows() == 12);
    CHECK(truth.cols() == 4);
    const qdt::Mat data = qdt::read_csv(out / "dataset.csv");
    CHECK(data.rows() == 40);
    CHECK(data.cols() == 4);
}

TEST_CASE("cli simulate is byte-identical for a fixed seed") {
    TempDir tmp("det");
    const std::vector<std::string> base = {"simulate",  "--hilbert-dim", "10",
                                           "--outcomes", "3",            "--probes",
                                           "30",         "--sigma",      "0.05",
                                           "--seed",     "11"};
    auto with_out = [&](const std::string& dir) {
        auto args = base;
        args.push_back("--out-dir");
        args.push_back(dir);
        return args;
    };
    REQUIRE(run_cli(with_out(tmp.sub("a"))) == 0);
    REQUIRE(run_cli(with_out(tmp.sub("b"))) == 0);
    for (const char* name : {"probes.csv", "ground_truth.csv", "dataset.csv",
                             "manifest.json"})
        CHECK(slurp(tmp.path / "a" / name) == slurp(tmp.path / "b" / name));
}

TEST_CASE("cli fit reconstructs from a simulated directory") {
    TempDir tmp("fit");
    REQUIRE(run_cli({"simulate", "--hilbert-dim", "16", "--outcomes", "4", "--probes",
                     "80", "--seed", "5", "--out-dir", tmp.sub("data")}) == 0);

    SUBCASE("gd solver") {
        const int rc =
            run_cli({"fit", "--data-dir", tmp.sub("data"), "--out-dir", tmp.sub("gd"),
                     "--epochs", "8", "--trials", "2", "--seed", "9"});
        REQUIRE(rc == 0);
        const fs::path out = tmp.path / "gd";
        CHECK(fs::exists(out / "pi_hat.csv"));
        CHECK(fs::exists(out / "loss_history.csv"));
        CHECK(fs::exists(out / "timings.json"));
        const json manifest = manifest_of(out);
        CHECK(manifest.at("solver") == "gd");
        CHECK(manifest.at("seeds") == json::array({9, 10}));
        CHECK(manifest.at("fidelity").at("per_trial").size() == 2);
        CHECK(manifest.at("fidelity").at("mean").get<double>() > 0.0);
        const qdt::Mat losses = qdt::read_csv(out / "loss_history.csv");
        CHECK(losses.rows() == 2);  // one row per trial
        CHECK(losses.cols() == 8);  // one entry per epoch
    }

    SUBCASE("baseline solver") {
        const int rc = run_cli({"fit", "--data-dir", tmp.sub("data"), "--out-dir",
                                tmp.sub("base"), "--solver", "baseline"});
        REQUIRE(rc == 0);
        const json manifest = manifest_of(tmp.path / "base");
        CHECK(manifest.at("solver") == "baseline");
        CHECK(fs::exists(tmp.path / "base" / "pi_hat.csv"));
    }

    SUBCASE("fit manifests are byte-identical across reruns") {
        auto args = [&](const std::string& dir) {
            return std::vector<std::string>{"fit",      "--data-dir", tmp.sub("data"),
                                            "--out-dir", dir,         "--epochs",
                                            "6",        "--seed",     "21"};
        };
        REQUIRE(run_cli(args(tmp.sub("r1"))) == 0);
        REQUIRE(run_cli(args(tmp.sub("r2"))) == 0);
        for (const char* name : {"pi_hat.csv", "loss_history.csv", "manifest.json"})
            CHECK(slurp(tmp.path / "r1" / name) == slurp(tmp.path / "r2" / name));
    }
}

TEST_CASE("cli phase-sensitive pipeline") {
    TempDir tmp("stiefel");
    REQUIRE(run_cli({"simulate", "--solver", "stiefel", "--hilbert-dim", "4",
                     "--outcomes", "2", "--seed", "2", "--out-dir", tmp.sub("data")}) ==
            0);
    const json sim_manifest = manifest_of(tmp.path / "data");
    CHECK(sim_manifest.at("mode") == "phase_sensitive");
    const qdt::Mat probes = qdt::read_csv(tmp.path / "data" / "probes.csv");
    CHECK(probes.cols() == 2);  // (mu, phase) pairs

    const int rc = run_cli({"fit", "--solver", "stiefel", "--data-dir", tmp.sub("data"),
                            "--out-dir", tmp.sub("fit"), "--config",
                            [&] {
                                const std::string cfg = tmp.sub("stiefel.json");
                                std::ofstream(cfg)
                                    << R"({"stiefel": {"iterations": 60, "gamma": 0.1}})";
                                return cfg;
                            }()});
    REQUIRE(rc == 0);
    const fs::path out = tmp.path / "fit";
    const json manifest = manifest_of(out);
    CHECK(manifest.at("solver") == "stiefel");
    CHECK(manifest.at("block_ranks") == json::array({1, 3}));
    CHECK(fs::exists(out / "element_0_re.csv"));
    CHECK(fs::exists(out / "element_0_im.csv"));
    CHECK(fs::exists(out / "element_1_re.csv"));
    CHECK(fs::exists(out / "element_1_im.csv"));
    CHECK(manifest.at("fidelity").at("per_element").size() == 2);

    // Mixing solvers and data modes is rejected.
    CHECK(run_cli({"fit", "--data-dir", tmp.sub("data"), "--out-dir",
                   tmp.sub("bad")}) == 1);
}

TEST_CASE("cli accepts the paper-scale simulate configuration") {
    TempDir tmp("paper");
    const int rc = run_cli({"simulate", "--hilbert-dim", "200", "--outcomes", "25",
                            "--probes", "2000", "--eta", "0.85", "--seed", "1",
                            "--out-dir", tmp.sub("out")});
    REQUIRE(rc == 0);
    const qdt::Mat data = qdt::read_csv(tmp.path / "out" / "dataset.csv");
    CHECK(data.rows() == 2000);
    CHECK(data.cols() == 25);
}

TEST_CASE("cli benchmark smoke run") {
    TempDir tmp("bench");
    const std::string cfg = tmp.sub("bench.json");
    std::ofstream(cfg) << R"({
      "outcomes": 3, "probes": 60, "epochs": 3, "trials": 1,
      "baseline": {"step_size": 1e-3, "iterations": 20},
      "benchmark": {"kind": "time", "grid": [8, 12]}
    })";
    REQUIRE(run_cli({"benchmark", "--config", cfg, "--out-dir", tmp.sub("out")}) == 0);
    const fs::path out = tmp.path / "out";
    const std::string csv = slurp(out / "results.csv");
    CHECK(csv.find("kind,grid_value,solver") == 0);
    // Header plus one gd and one baseline row per grid point.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const json manifest = manifest_of(out);
    CHECK(manifest.at("command") == "benchmark");

    CHECK(run_cli({"benchmark", "--kind", "bogus", "--out-dir", tmp.sub("x")}) == 1);
}

TEST_CASE("cli fidelity subcommand") {
    TempDir tmp("fid");
    qdt::Mat a(3, 2);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    a(2, 1) = 1.0;
    qdt::write_csv(tmp.path / "a.csv", a);
    qdt::write_csv(tmp.path / "b.csv", a);
    CHECK(run_cli({"fidelity", "--estimate", tmp.sub("a.csv"), "--truth",
                   tmp.sub("b.csv"), "--out-dir", tmp.sub("out")}) == 0);
    const json manifest = manifest_of(tmp.path / "out");
    CHECK(manifest.at("fidelity").at("average").get<double>() ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cli flag overrides beat config file values") {
    TempDir tmp("override");
    const std::string cfg = tmp.sub("cfg.json");
    std::ofstream(cfg) << R"({"hilbert_dim": 10, "outcomes": 3, "probes": 30, "seed": 1})";
    REQUIRE(run_cli({"simulate", "--config", cfg, "--seed", "42", "--out-dir",
                     tmp.sub("out")}) == 0);
    const json manifest = manifest_of(tmp.path / "out");
    CHECK(manifest.at("config").at("seed") == 42);
    CHECK(manifest.at("config").at("hilbert_dim") == 10);
}

TEST_CASE("cli error handling maps to exit codes") {
    TempDir tmp("err");
    // Missing data dir: config error.
    CHECK(run_cli({"fit", "--data-dir", tmp.sub("nope"), "--out-dir", tmp.sub("o")}) == 1);
    // Invalid eta: config error.
    CHECK(run_cli({"simulate", "--eta", "1.5", "--out-dir", tmp.sub("o2")}) == 1);
    // Unknown config key: config error.
    const std::string cfg = tmp.sub("bad.json");
    std::ofstream(cfg) << R"({"hilbert_dmi": 10})";
    CHECK(run_cli({"simulate", "--config", cfg, "--out-dir", tmp.sub("o3")}) == 1);
    // Outcomes exceeding the Hilbert dimension: config error.
    CHECK(run_cli({"simulate", "--hilbert-dim", "4", "--outcomes", "9", "--out-dir",
                   tmp.sub("o4")}) == 1);
    // Failed runs must not leave partial artifacts behind.
    CHECK_FALSE(fs::exists(tmp.path / "o4" / "probes.csv"));
}

TEST_CASE("installed binary runs end to end") {
    TempDir tmp("bin");
    const std::string binary = QDT_CLI_BINARY;

    const int help = std::system((binary + " --help > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(help) == 0);

    const int bad = std::system((binary + " bogus-subcommand > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(bad) != 0);

    const int sim = std::system((binary + " simulate --hilbert-dim 8 --outcomes 3 " +
                                 "--probes 20 --out-dir " + tmp.sub("out") +
                                 " > /dev/null 2>&1")
                                    .c_str());
    CHECK(WEXITSTATUS(sim) == 0);
    CHECK(fs::exists(tmp.path / "out" / "manifest.json"));
}
