#include "qdt/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qdt/baseline.hpp"
#include "qdt/detector.hpp"
#include "qdt/errors.hpp"
#include "qdt/fock.hpp"
#include "qdt/gd.hpp"
#include "qdt/io.hpp"
#include "qdt/kernels.hpp"
#include "qdt/metrics.hpp"
#include "qdt/stiefel.hpp"
#include "qdt/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace qdt::cli {
namespace {

struct BaselineCliConfig {
    double step_size = 1e-3;
    std::size_t iterations = 2000;
};

struct StiefelCliConfig {
    std::vector<std::size_t> block_ranks;  // empty: rank-1 counts + full-rank overflow
    std::size_t iterations = 2000;
    double gamma = 0.05;
    std::size_t num_amplitudes = 16;
    std::size_t num_phases = 8;
};

struct BenchmarkCliConfig {
    std::string kind;           // time | noise | data
    std::vector<double> grid;
};

struct RunConfig {
    std::string solver = "gd";  // gd | baseline | stiefel
    std::size_t hilbert_dim = 60;
    std::size_t outcomes = 10;
    std::size_t probes = 600;
    double eta = 1.0;
    double sigma = 0.0;
    double lambda = 0.0;
    std::size_t epochs = 100;
    std::size_t batch_size = 25;
    double lr = 1e-2;
    double lr_decay = 0.999;
    std::uint64_t seed = 1;
    std::size_t trials = 1;
    std::string out_dir = "qdt_out";
    std::uint64_t shots = 0;  // 0: exact probabilities
    double tail_bound = 1e-5;
    std::string kernel = "auto";
    BaselineCliConfig baseline;
    StiefelCliConfig stiefel;
    BenchmarkCliConfig benchmark;
};

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& item : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return item.key() == k;
            }) == allowed.end())
            throw config_error("config: unknown key '" + item.key() + "' in " + where);
    }
}

RunConfig load_config(const std::optional<std::string>& path) {
    RunConfig cfg;
    if (!path) return cfg;
    std::ifstream in(*path);
    if (!in) throw config_error("config: cannot open " + *path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("config: invalid JSON in " + *path + ": " + e.what());
    }
    check_keys(j,
               {"solver", "hilbert_dim", "outcomes", "probes", "eta", "sigma", "lambda",
                "epochs", "batch_size", "lr", "lr_decay", "seed", "trials", "out_dir",
                "shots", "tail_bound", "kernel", "baseline", "stiefel", "benchmark"},
               "top level");
    read_field(j, "solver", cfg.solver);
    read_field(j, "hilbert_dim", cfg.hilbert_dim);
    read_field(j, "outcomes", cfg.outcomes);
    read_field(j, "probes", cfg.probes);
    read_field(j, "eta", cfg.eta);
    read_field(j, "sigma", cfg.sigma);
    read_field(j, "lambda", cfg.lambda);
    read_field(j, "epochs", cfg.epochs);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "lr", cfg.lr);
    read_field(j, "lr_decay", cfg.lr_decay);
    read_field(j, "seed", cfg.seed);
    read_field(j, "trials", cfg.trials);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "shots", cfg.shots);
    read_field(j, "tail_bound", cfg.tail_bound);
    read_field(j, "kernel", cfg.kernel);
    if (j.contains("baseline")) {
        const json& b = j.at("baseline");
        check_keys(b, {"step_size", "iterations"}, "baseline");
        read_field(b, "step_size", cfg.baseline.step_size);
        read_field(b, "iterations", cfg.baseline.iterations);
    }
    if (j.contains("stiefel")) {
        const json& s = j.at("stiefel");
        check_keys(s, {"block_ranks", "iterations", "gamma", "num_amplitudes", "num_phases"},
                   "stiefel");
        read_field(s, "block_ranks", cfg.stiefel.block_ranks);
        read_field(s, "iterations", cfg.stiefel.iterations);
        read_field(s, "gamma", cfg.stiefel.gamma);
        read_field(s, "num_amplitudes", cfg.stiefel.num_amplitudes);
        read_field(s, "num_phases", cfg.stiefel.num_phases);
    }
    if (j.contains("benchmark")) {
        const json& b = j.at("benchmark");
        check_keys(b, {"kind", "grid"}, "benchmark");
        read_field(b, "kind", cfg.benchmark.kind);
        read_field(b, "grid", cfg.benchmark.grid);
    }
    return cfg;
}

// Config echo for manifests. out_dir is deliberately excluded so identical
// logical runs into different directories emit byte-identical manifests.
json config_echo(const RunConfig& cfg) {
    json j;
    j["solver"] = cfg.solver;
    j["hilbert_dim"] = cfg.hilbert_dim;
    j["outcomes"] = cfg.outcomes;
    j["probes"] = cfg.probes;
    j["eta"] = cfg.eta;
    j["sigma"] = cfg.sigma;
    j["lambda"] = cfg.lambda;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["lr_decay"] = cfg.lr_decay;
    j["seed"] = cfg.seed;
    j["trials"] = cfg.trials;
    j["shots"] = cfg.shots;
    j["tail_bound"] = cfg.tail_bound;
    j["kernel"] = kernels::backend_name(kernels::active_backend());
    j["baseline"] = {{"step_size", cfg.baseline.step_size},
                     {"iterations", cfg.baseline.iterations}};
    j["stiefel"] = {{"block_ranks", cfg.stiefel.block_ranks},
                    {"iterations", cfg.stiefel.iterations},
                    {"gamma", cfg.stiefel.gamma},
                    {"num_amplitudes", cfg.stiefel.num_amplitudes},
                    {"num_phases", cfg.stiefel.num_phases}};
    if (!cfg.benchmark.kind.empty())
        j["benchmark"] = {{"kind", cfg.benchmark.kind}, {"grid", cfg.benchmark.grid}};
    return j;
}

// Tracks written files and removes them unless the run commits.
class ArtifactSink {
  public:
    explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }
    ~ArtifactSink() {
        if (committed_) return;
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }
    fs::path file(const std::string& name) {
        written_.push_back(dir_ / name);
        return written_.back();
    }
    const fs::path& dir() const { return dir_; }
    void commit() { committed_ = true; }

  private:
    fs::path dir_;
    std::vector<fs::path> written_;
    bool committed_ = false;
};

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw config_error("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

void apply_kernel_choice(const std::string& kernel) {
    if (kernel == "auto") {
        kernels::reset_backend();
        return;
    }
    kernels::force_backend(kernels::backend_from_name(kernel));
}

DiagonalPovm ground_truth_povm(const RunConfig& cfg) {
    return cfg.eta == 1.0 ? ideal_pnr_povm(cfg.hilbert_dim, cfg.outcomes)
                          : efficient_pnr_povm(cfg.hilbert_dim, cfg.outcomes, cfg.eta);
}

std::vector<std::size_t> default_stiefel_ranks(std::size_t m, std::size_t n) {
    if (n < 2 || n > m) throw config_error("stiefel: need 2 <= outcomes <= hilbert_dim");
    std::vector<std::size_t> ranks(n, 1);
    ranks.back() = m - (n - 1);  // overflow block carries the remaining rank
    return ranks;
}

Mat mu_column(const ProbeSet& probes) {
    Mat m(probes.num_probes(), 1);
    for (std::size_t i = 0; i < probes.num_probes(); ++i)
        m(i, 0) = probes.mean_photon_numbers[i];
    return m;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& cfg) {
    ArtifactSink sink(cfg.out_dir);
    json manifest;
    manifest["tool"] = "qdt";
    manifest["version"] = kVersion;
    manifest["command"] = "simulate";
    manifest["seeds"] = {cfg.seed};
    json artifacts;

    if (cfg.solver == "stiefel") {
        if (cfg.sigma != 0.0 || cfg.shots != 0)
            throw config_error(
                "simulate: amplitude noise and finite shots are not modeled for the "
                "phase-sensitive pipeline");
        manifest["mode"] = "phase_sensitive";
        const auto grid = phase_probe_grid(cfg.stiefel.num_amplitudes,
                                           cfg.stiefel.num_phases, cfg.hilbert_dim,
                                           cfg.tail_bound);
        const DiagonalPovm truth_diag = ground_truth_povm(cfg);
        const StiefelPoint truth = stiefel_from_diagonal(truth_diag);
        const PhaseSensitiveDataset data = simulate_phase_sensitive(truth, grid);

        Mat probe_mat(grid.size(), 2);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            probe_mat(i, 0) = grid[i].first;
            probe_mat(i, 1) = grid[i].second;
        }
        write_csv(sink.file("probes.csv"), probe_mat);
        write_csv(sink.file("ground_truth.csv"), truth_diag.pi);
        write_csv(sink.file("dataset.csv"), data.probs);
        artifacts["probes"] = "probes.csv";
        artifacts["ground_truth"] = "ground_truth.csv";
        artifacts["dataset"] = "dataset.csv";
    } else {
        manifest["mode"] = "diagonal";
        const ProbeSet probes =
            build_probe_grid(cfg.probes, cfg.hilbert_dim, cfg.tail_bound);
        const DiagonalPovm truth = ground_truth_povm(cfg);
        const Dataset ds = simulate_dataset(
            truth, probes, cfg.sigma, cfg.seed,
            cfg.shots > 0 ? std::optional<std::uint64_t>(cfg.shots) : std::nullopt);

        write_csv(sink.file("probes.csv"), mu_column(probes));
        write_csv(sink.file("ground_truth.csv"), truth.pi);
        write_csv(sink.file("dataset.csv"), ds.probs);
        artifacts["probes"] = "probes.csv";
        artifacts["ground_truth"] = "ground_truth.csv";
        artifacts["dataset"] = "dataset.csv";
    }

    manifest["config"] = config_echo(cfg);
    manifest["artifacts"] = artifacts;
    write_json_file(sink.file("manifest.json"), manifest);
    sink.commit();
    std::cout << "simulate: wrote " << sink.dir().string() << "\n";
    return 0;
}

// --------------------------------------------------------------------- fit

struct LoadedData {
    json manifest;
    std::string mode;
    std::size_t hilbert_dim = 0;
    double tail_bound = 1e-5;
    Mat dataset;                                       // D x N
    std::vector<double> mu;                            // diagonal mode
    std::vector<std::pair<double, double>> amplitudes; // phase-sensitive mode
    std::optional<Mat> ground_truth;                   // M x N
};

LoadedData load_data_dir(const fs::path& dir) {
    LoadedData data;
    data.manifest = read_json_file(dir / "manifest.json");
    if (!data.manifest.contains("mode") || !data.manifest.contains("config"))
        throw config_error("fit: " + (dir / "manifest.json").string() +
                           " is not a simulate manifest");
    data.mode = data.manifest.at("mode").get<std::string>();
    const json& cfg = data.manifest.at("config");
    data.hilbert_dim = cfg.at("hilbert_dim").get<std::size_t>();
    data.tail_bound = cfg.at("tail_bound").get<double>();

    const json& artifacts = data.manifest.at("artifacts");
    data.dataset = read_csv(dir / artifacts.at("dataset").get<std::string>());
    const Mat probe_mat = read_csv(dir / artifacts.at("probes").get<std::string>());
    if (data.mode == "diagonal") {
        if (probe_mat.cols() != 1) throw config_error("fit: probes.csv must be D x 1");
        data.mu.assign(probe_mat.data(), probe_mat.data() + probe_mat.rows());
    } else if (data.mode == "phase_sensitive") {
        if (probe_mat.cols() != 2) throw config_error("fit: probes.csv must be D x 2");
        for (std::size_t i = 0; i < probe_mat.rows(); ++i)
            data.amplitudes.emplace_back(probe_mat(i, 0), probe_mat(i, 1));
    } else {
        throw config_error("fit: unknown data mode " + data.mode);
    }
    if (artifacts.contains("ground_truth"))
        data.ground_truth = read_csv(dir / artifacts.at("ground_truth").get<std::string>());
    return data;
}

json fidelity_json(const std::vector<double>& per_trial) {
    json j;
    j["per_trial"] = per_trial;
    const double mean = std::accumulate(per_trial.begin(), per_trial.end(), 0.0) /
                        static_cast<double>(per_trial.size());
    double var = 0.0;
    for (double x : per_trial) var += (x - mean) * (x - mean);
    j["mean"] = mean;
    j["stddev"] = per_trial.size() > 1
                      ? std::sqrt(var / static_cast<double>(per_trial.size() - 1))
                      : 0.0;
    return j;
}

Mat histories_matrix(const std::vector<std::vector<double>>& histories) {
    Mat m(histories.size(), histories.empty() ? 0 : histories.front().size());
    for (std::size_t i = 0; i < histories.size(); ++i)
        for (std::size_t j = 0; j < histories[i].size(); ++j) m(i, j) = histories[i][j];
    return m;
}

int cmd_fit_diagonal(const RunConfig& cfg, const LoadedData& data, ArtifactSink& sink,
                     json& manifest) {
    ProbeSet probes;
    probes.hilbert_dim = data.hilbert_dim;
    probes.tail_bound = data.tail_bound;
    probes.mean_photon_numbers = data.mu;
    probes.probe_matrix = probe_matrix_from(data.mu, data.hilbert_dim);

    Dataset ds;
    ds.probs = data.dataset;

    std::optional<DiagonalPovm> truth;
    if (data.ground_truth) truth = DiagonalPovm{*data.ground_truth};

    std::vector<FitResult> results;
    std::vector<double> fidelities;
    if (cfg.solver == "gd") {
        FitConfig fit_cfg;
        fit_cfg.learning_rate = cfg.lr;
        fit_cfg.lr_decay = cfg.lr_decay;
        fit_cfg.epochs = cfg.epochs;
        fit_cfg.batch_size = cfg.batch_size;
        fit_cfg.lambda = cfg.lambda;
        fit_cfg.seed = cfg.seed;
        MultiStartSummary summary = multi_start_fit(ds, probes, fit_cfg, cfg.trials,
                                                    truth ? &*truth : nullptr);
        results = std::move(summary.results);
        fidelities = std::move(summary.average_fidelities);
    } else {
        BaselineConfig base_cfg;
        base_cfg.step_size = cfg.baseline.step_size;
        base_cfg.iterations = cfg.baseline.iterations;
        base_cfg.lambda = cfg.lambda;
        results.push_back(fit_baseline(ds, probes, base_cfg));
        if (truth)
            fidelities.push_back(average_fidelity(results.front().pi_hat, *truth).average);
    }

    // Best trial by final loss; ties resolved by trial order.
    std::size_t best = 0;
    for (std::size_t k = 1; k < results.size(); ++k)
        if (results[k].loss_history.back() < results[best].loss_history.back()) best = k;

    write_csv(sink.file("pi_hat.csv"), results[best].pi_hat.pi);
    std::vector<std::vector<double>> histories;
    std::vector<double> final_losses;
    json seeds = json::array();
    json timings;
    timings["per_trial_seconds"] = json::array();
    timings["per_iteration_seconds"] = json::array();
    for (const auto& r : results) {
        histories.push_back(r.loss_history);
        final_losses.push_back(r.loss_history.back());
        seeds.push_back(r.seed);
        timings["per_trial_seconds"].push_back(r.wall_clock_seconds);
        timings["per_iteration_seconds"].push_back(r.wall_clock_per_iteration);
    }
    write_csv(sink.file("loss_history.csv"), histories_matrix(histories));
    write_json_file(sink.file("timings.json"), timings);

    manifest["solver"] = cfg.solver;
    manifest["seeds"] = seeds;
    manifest["best_trial"] = best;
    manifest["loss"] = {{"final_per_trial", final_losses}};
    json artifacts;
    artifacts["pi_hat"] = "pi_hat.csv";
    artifacts["loss_history"] = "loss_history.csv";
    artifacts["timings"] = "timings.json";
    manifest["artifacts"] = artifacts;
    if (truth) {
        json fid = fidelity_json(fidelities);
        const FidelityReport best_report = average_fidelity(results[best].pi_hat, *truth);
        fid["per_element_best"] = best_report.per_element;
        manifest["fidelity"] = fid;
    }
    return 0;
}

int cmd_fit_stiefel(const RunConfig& cfg, const LoadedData& data, ArtifactSink& sink,
                    json& manifest) {
    PhaseSensitiveDataset ds;
    ds.probs = data.dataset;
    ds.probe_amplitudes = data.amplitudes;

    StiefelFitConfig fit_cfg;
    fit_cfg.block_ranks = cfg.stiefel.block_ranks.empty()
                              ? default_stiefel_ranks(data.hilbert_dim, ds.probs.cols())
                              : cfg.stiefel.block_ranks;
    fit_cfg.iterations = cfg.stiefel.iterations;
    fit_cfg.gamma = cfg.stiefel.gamma;
    fit_cfg.seed = cfg.seed;

    const StiefelFitResult result = fit_phase_sensitive(ds, data.hilbert_dim, fit_cfg);

    json artifacts;
    const std::size_t n = result.point.num_outcomes();
    const std::size_t m = data.hilbert_dim;
    for (std::size_t j = 0; j < n; ++j) {
        const Eigen::MatrixXcd e = result.point.povm_element(j);
        Mat re(m, m), im(m, m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) {
                re(r, c) = e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))
                               .real();
                im(r, c) = e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))
                               .imag();
            }
        const std::string re_name = "element_" + std::to_string(j) + "_re.csv";
        const std::string im_name = "element_" + std::to_string(j) + "_im.csv";
        write_csv(sink.file(re_name), re);
        write_csv(sink.file(im_name), im);
        artifacts["element_" + std::to_string(j)] = {{"re", re_name}, {"im", im_name}};
    }
    write_csv(sink.file("loss_history.csv"), histories_matrix({result.loss_history}));
    artifacts["loss_history"] = "loss_history.csv";

    json timings;
    timings["per_trial_seconds"] = {result.wall_clock_seconds};
    timings["per_iteration_seconds"] = {result.wall_clock_per_iteration};
    write_json_file(sink.file("timings.json"), timings);
    artifacts["timings"] = "timings.json";

    manifest["solver"] = "stiefel";
    manifest["seeds"] = {cfg.seed};
    manifest["block_ranks"] = fit_cfg.block_ranks;
    manifest["loss"] = {{"final_per_trial", {result.loss_history.back()}}};
    manifest["artifacts"] = artifacts;

    if (data.ground_truth) {
        // Per-element matrix fidelity against the diagonal ground truth.
        std::vector<double> per_element;
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            Eigen::MatrixXcd truth_e = Eigen::MatrixXcd::Zero(
                static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i)
                truth_e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
                    (*data.ground_truth)(i, j);
            const double f = matrix_fidelity_oracle(result.point.povm_element(j), truth_e);
            per_element.push_back(f);
            sum += f;
        }
        manifest["fidelity"] = {{"per_element", per_element},
                                {"mean", sum / static_cast<double>(n)}};
    }
    return 0;
}

int cmd_fit(const RunConfig& cfg, const std::string& data_dir) {
    const LoadedData data = load_data_dir(data_dir);
    if ((cfg.solver == "stiefel") != (data.mode == "phase_sensitive"))
        throw config_error("fit: solver '" + cfg.solver + "' does not match data mode '" +
                           data.mode + "'");

    ArtifactSink sink(cfg.out_dir);
    json manifest;
    manifest["tool"] = "qdt";
    manifest["version"] = kVersion;
    manifest["command"] = "fit";
    manifest["config"] = config_echo(cfg);

    if (cfg.solver == "stiefel")
        cmd_fit_stiefel(cfg, data, sink, manifest);
    else if (cfg.solver == "gd" || cfg.solver == "baseline")
        cmd_fit_diagonal(cfg, data, sink, manifest);
    else
        throw config_error("fit: unknown solver " + cfg.solver);

    write_json_file(sink.file("manifest.json"), manifest);
    sink.commit();
    std::cout << "fit: wrote " << sink.dir().string() << "\n";
    return 0;
}

// --------------------------------------------------------------- benchmark

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) /
                           static_cast<double>(v.size());
}

struct BenchRow {
    std::string kind;
    double grid_value;
    std::string solver;
    std::size_t trials;
    double fidelity_mean;
    double fidelity_stddev;
    double wall_clock_mean_s;
    double per_iteration_mean_s;
};

void append_rows(std::vector<BenchRow>& rows, const std::string& kind, double grid_value,
                 const RunConfig& cfg, const Dataset& ds, const ProbeSet& probes,
                 const DiagonalPovm& truth) {
    FitConfig fit_cfg;
    fit_cfg.learning_rate = cfg.lr;
    fit_cfg.lr_decay = cfg.lr_decay;
    fit_cfg.epochs = cfg.epochs;
    fit_cfg.batch_size = cfg.batch_size;
    fit_cfg.lambda = cfg.lambda;
    fit_cfg.seed = cfg.seed;
    const MultiStartSummary summary =
        multi_start_fit(ds, probes, fit_cfg, cfg.trials, &truth);

    std::vector<double> gd_totals;
    std::vector<double> gd_iters;
    for (const auto& r : summary.results) {
        gd_totals.push_back(r.wall_clock_seconds);
        for (double t : r.wall_clock_per_iteration) gd_iters.push_back(t);
    }
    rows.push_back({kind, grid_value, "gd", cfg.trials, *summary.fidelity_mean,
                    *summary.fidelity_stddev, mean_of(gd_totals), mean_of(gd_iters)});

    BaselineConfig base_cfg;
    base_cfg.step_size = cfg.baseline.step_size;
    base_cfg.iterations = cfg.baseline.iterations;
    base_cfg.lambda = cfg.lambda;
    const FitResult base = fit_baseline(ds, probes, base_cfg);
    const double base_fid = average_fidelity(base.pi_hat, truth).average;
    rows.push_back({kind, grid_value, "baseline", 1, base_fid, 0.0,
                    base.wall_clock_seconds, mean_of(base.wall_clock_per_iteration)});
}

int cmd_benchmark(const RunConfig& cfg) {
    const std::string& kind = cfg.benchmark.kind;
    if (kind != "time" && kind != "noise" && kind != "data")
        throw config_error("benchmark: kind must be time, noise or data");

    std::vector<double> grid = cfg.benchmark.grid;
    if (grid.empty()) {
        if (kind == "time")
            grid = {50, 100, 200, 400};
        else if (kind == "data")
            grid = {75, 150, 300, 600};
        else {
            const double mu_max = max_mean_photon(cfg.hilbert_dim, cfg.tail_bound);
            grid = {0.0, 0.01 * mu_max, 0.02 * mu_max, 0.035 * mu_max, 0.05 * mu_max};
        }
    }

    ArtifactSink sink(cfg.out_dir);
    std::vector<BenchRow> rows;
    for (const double value : grid) {
        RunConfig point_cfg = cfg;
        if (kind == "time")
            point_cfg.hilbert_dim = static_cast<std::size_t>(value);
        else if (kind == "data")
            point_cfg.probes = static_cast<std::size_t>(value);
        else
            point_cfg.sigma = value;

        const ProbeSet probes = build_probe_grid(point_cfg.probes, point_cfg.hilbert_dim,
                                                 point_cfg.tail_bound);
        const DiagonalPovm truth = ground_truth_povm(point_cfg);
        const Dataset ds = simulate_dataset(
            truth, probes, point_cfg.sigma, point_cfg.seed,
            point_cfg.shots > 0 ? std::optional<std::uint64_t>(point_cfg.shots)
                                : std::nullopt);
        append_rows(rows, kind, value, point_cfg, ds, probes, truth);
    }

    const fs::path csv_path = sink.file("results.csv");
    {
        std::ofstream out(csv_path);
        if (!out) throw config_error("benchmark: cannot open " + csv_path.string());
        out << "kind,grid_value,solver,trials,fidelity_mean,fidelity_stddev,"
               "wall_clock_mean_s,per_iteration_mean_s\n";
        for (const auto& r : rows)
            out << r.kind << ',' << format_g17(r.grid_value) << ',' << r.solver << ','
                << r.trials << ',' << format_g17(r.fidelity_mean) << ','
                << format_g17(r.fidelity_stddev) << ',' << format_g17(r.wall_clock_mean_s)
                << ',' << format_g17(r.per_iteration_mean_s) << '\n';
    }

    json manifest;
    manifest["tool"] = "qdt";
    manifest["version"] = kVersion;
    manifest["command"] = "benchmark";
    manifest["config"] = config_echo(cfg);
    manifest["benchmark"] = {{"kind", kind}, {"grid", grid}};
    manifest["seeds"] = {cfg.seed};
    manifest["artifacts"] = {{"results", "results.csv"}};
    manifest["note"] =
        "baseline solver is an in-repo projected-gradient substitute for an "
        "interior-point CCO solver; wall-clock columns are measurements and vary "
        "across runs";
    write_json_file(sink.file("manifest.json"), manifest);
    sink.commit();
    std::cout << "benchmark: wrote " << sink.dir().string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- fidelity

int cmd_fidelity(const std::string& estimate_path, const std::string& truth_path,
                 const std::optional<std::string>& out_dir) {
    const DiagonalPovm estimate{read_csv(estimate_path)};
    const DiagonalPovm truth{read_csv(truth_path)};
    const FidelityReport report = average_fidelity(estimate, truth);

    std::cout << "average fidelity: " << format_g17(report.average) << "\n";
    for (std::size_t j = 0; j < report.per_element.size(); ++j) {
        std::cout << "element " << j << ": ";
        if (report.defined[j])
            std::cout << format_g17(report.per_element[j]);
        else
            std::cout << "undefined (zero trace)";
        std::cout << "\n";
    }

    if (out_dir) {
        ArtifactSink sink(*out_dir);
        json manifest;
        manifest["tool"] = "qdt";
        manifest["version"] = kVersion;
        manifest["command"] = "fidelity";
        manifest["fidelity"] = {{"average", report.average},
                                {"per_element", report.per_element},
                                {"num_undefined", report.num_undefined}};
        write_json_file(sink.file("manifest.json"), manifest);
        sink.commit();
    }
    return 0;
}

void add_common_options(CLI::App* cmd, RunConfig& cfg, std::optional<std::string>& config_path) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its fields");
    // Stored into cfg after the config file is loaded; see apply_overrides.
    cmd->add_option("--solver", cfg.solver, "gd | baseline | stiefel");
    cmd->add_option("--hilbert-dim", cfg.hilbert_dim, "Hilbert space truncation M");
    cmd->add_option("--outcomes", cfg.outcomes, "number of POVM outcomes N");
    cmd->add_option("--probes", cfg.probes, "number of coherent probes D");
    cmd->add_option("--eta", cfg.eta, "detector quantum efficiency");
    cmd->add_option("--sigma", cfg.sigma, "amplitude noise stddev");
    cmd->add_option("--lambda", cfg.lambda, "smoothing regularization strength");
    cmd->add_option("--epochs", cfg.epochs, "gd epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "gd minibatch size");
    cmd->add_option("--lr", cfg.lr, "gd learning rate");
    cmd->add_option("--lr-decay", cfg.lr_decay, "per-epoch learning rate decay");
    cmd->add_option("--seed", cfg.seed, "base RNG seed");
    cmd->add_option("--trials", cfg.trials, "number of random restarts");
    cmd->add_option("--out-dir", cfg.out_dir, "output directory");
    cmd->add_option("--shots", cfg.shots, "finite shots per probe (0 = exact)");
    cmd->add_option("--tail-bound", cfg.tail_bound, "probe truncation tail bound");
    cmd->add_option("--kernel", cfg.kernel, "kernel backend: auto | scalar | avx2");
}

// Re-applies command line values on top of the JSON config.
void apply_overrides(const CLI::App* cmd, RunConfig& cfg, const RunConfig& flag_values) {
    const auto set = [cmd](const std::string& name) { return cmd->count(name) > 0; };
    if (set("--solver")) cfg.solver = flag_values.solver;
    if (set("--hilbert-dim")) cfg.hilbert_dim = flag_values.hilbert_dim;
    if (set("--outcomes")) cfg.outcomes = flag_values.outcomes;
    if (set("--probes")) cfg.probes = flag_values.probes;
    if (set("--eta")) cfg.eta = flag_values.eta;
    if (set("--sigma")) cfg.sigma = flag_values.sigma;
    if (set("--lambda")) cfg.lambda = flag_values.lambda;
    if (set("--epochs")) cfg.epochs = flag_values.epochs;
    if (set("--batch-size")) cfg.batch_size = flag_values.batch_size;
    if (set("--lr")) cfg.lr = flag_values.lr;
    if (set("--lr-decay")) cfg.lr_decay = flag_values.lr_decay;
    if (set("--seed")) cfg.seed = flag_values.seed;
    if (set("--trials")) cfg.trials = flag_values.trials;
    if (set("--out-dir")) cfg.out_dir = flag_values.out_dir;
    if (set("--shots")) cfg.shots = flag_values.shots;
    if (set("--tail-bound")) cfg.tail_bound = flag_values.tail_bound;
    if (set("--kernel")) cfg.kernel = flag_values.kernel;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Quantum detector tomography via gradient descent"};
    app.require_subcommand(1);

    RunConfig sim_flags, fit_flags, bench_flags;
    std::optional<std::string> sim_config, fit_config, bench_config;
    std::string data_dir;
    std::string estimate_path, truth_path, bench_kind;
    std::optional<std::string> fid_out;

    CLI::App* sim = app.add_subcommand("simulate", "generate probe grid, POVM and dataset");
    add_common_options(sim, sim_flags, sim_config);

    CLI::App* fit_cmd = app.add_subcommand("fit", "reconstruct a POVM from a dataset");
    add_common_options(fit_cmd, fit_flags, fit_config);
    fit_cmd->add_option("--data-dir", data_dir, "directory written by `qdt simulate`")
        ->required();

    CLI::App* bench = app.add_subcommand("benchmark", "sweep a grid and compare solvers");
    add_common_options(bench, bench_flags, bench_config);
    bench->add_option("--kind", bench_kind, "time | noise | data");

    CLI::App* fid = app.add_subcommand("fidelity", "compare two POVM CSV files");
    fid->add_option("--estimate", estimate_path, "reconstructed POVM CSV")->required();
    fid->add_option("--truth", truth_path, "ground truth POVM CSV")->required();
    fid->add_option("--out-dir", fid_out, "optional manifest output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            RunConfig cfg = load_config(sim_config);
            apply_overrides(sim, cfg, sim_flags);
            apply_kernel_choice(cfg.kernel);
            return cmd_simulate(cfg);
        }
        if (fit_cmd->parsed()) {
            RunConfig cfg = load_config(fit_config);
            apply_overrides(fit_cmd, cfg, fit_flags);
            apply_kernel_choice(cfg.kernel);
            return cmd_fit(cfg, data_dir);
        }
        if (bench->parsed()) {
            RunConfig cfg = load_config(bench_config);
            apply_overrides(bench, cfg, bench_flags);
            if (bench->count("--kind") > 0) cfg.benchmark.kind = bench_kind;
            apply_kernel_choice(cfg.kernel);
            return cmd_benchmark(cfg);
        }
        if (fid->parsed()) return cmd_fidelity(estimate_path, truth_path, fid_out);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace qdt::cli
