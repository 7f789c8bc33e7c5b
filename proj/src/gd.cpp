#include "qdt/gd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <sstream>

#include "qdt/errors.hpp"
#include "qdt/kernels.hpp"
#include "qdt/metrics.hpp"

namespace qdt {
namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void check_dims(const Mat& theta, const Mat& p, const Mat& f) {
    if (f.rows() != p.rows())
        throw config_error("objective: F and P row counts differ");
    if (f.cols() != theta.rows() || p.cols() != theta.cols())
        throw config_error("objective: parameter shape inconsistent with F, P");
}

// Gather rows of src listed in batch into dst (|B| x cols).
void gather_rows(const Mat& src, std::span<const std::size_t> batch, Mat& dst) {
    for (std::size_t b = 0; b < batch.size(); ++b)
        std::memcpy(dst.row(b), src.row(batch[b]), src.cols() * sizeof(double));
}

// Residual loss (D/|B|) * sum_{i in B} ||P_i - (F Pi)_i||^2 given gathered
// batch blocks, plus the smoothing penalty at full strength.
double objective_from_batch(const Mat& pi, const Mat& p_b, const Mat& f_b,
                            std::size_t full_rows, double lambda, Mat& scratch) {
    const std::size_t bsz = f_b.rows();
    kernels::matmul(f_b.data(), pi.data(), scratch.data(), bsz, pi.rows(), pi.cols());
    double loss = kernels::sum_sq_diff(p_b.data(), scratch.data(), bsz * pi.cols());
    loss *= static_cast<double>(full_rows) / static_cast<double>(bsz);
    if (lambda != 0.0)
        loss += lambda * kernels::smoothness_penalty(pi.data(), pi.rows(), pi.cols());
    return loss;
}

}  // namespace

void FitConfig::validate() const {
    if (!(learning_rate > 0.0)) throw config_error("FitConfig: learning_rate must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw config_error("FitConfig: lr_decay must be in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw config_error("FitConfig: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw config_error("FitConfig: beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw config_error("FitConfig: epsilon must be > 0");
    if (batch_size == 0) throw config_error("FitConfig: batch_size must be positive");
    if (!(lambda >= 0.0)) throw config_error("FitConfig: lambda must be >= 0");
    if (!(init_stddev > 0.0)) throw config_error("FitConfig: init_stddev must be > 0");
}

Mat softmax_rows(const Mat& theta) {
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (!std::isfinite(theta.data()[i]))
            throw numeric_error("softmax_rows: non-finite input");
    Mat out(theta.rows(), theta.cols());
    kernels::softmax_rows(theta.data(), out.data(), theta.rows(), theta.cols());
    return out;
}

double objective(const Mat& theta, const Mat& p, const Mat& f, double lambda,
                 std::span<const std::size_t> batch) {
    check_dims(theta, p, f);
    if (batch.empty()) throw config_error("objective: empty batch");
    const Mat pi = softmax_rows(theta);
    Mat f_b(batch.size(), f.cols());
    Mat p_b(batch.size(), p.cols());
    gather_rows(f, batch, f_b);
    gather_rows(p, batch, p_b);
    Mat scratch(batch.size(), p.cols());
    return objective_from_batch(pi, p_b, f_b, f.rows(), lambda, scratch);
}

Mat gd_gradient(const Mat& theta, const Mat& p, const Mat& f, double lambda,
                std::span<const std::size_t> batch) {
    check_dims(theta, p, f);
    if (batch.empty()) throw config_error("gd_gradient: empty batch");
    const std::size_t m = theta.rows(), n = theta.cols(), bsz = batch.size();

    const Mat pi = softmax_rows(theta);
    Mat f_b(bsz, f.cols());
    Mat p_b(bsz, p.cols());
    gather_rows(f, batch, f_b);
    gather_rows(p, batch, p_b);

    // R = P_B - F_B Pi
    Mat r(bsz, n);
    kernels::matmul(f_b.data(), pi.data(), r.data(), bsz, m, n);
    kernels::sub(p_b.data(), r.data(), r.data(), bsz * n);

    // G_Pi = -2 (D/|B|) F_B^T R + lambda * smoothing'(Pi)
    Mat g_pi(m, n);
    kernels::matmul_at_b(f_b.data(), r.data(), g_pi.data(), bsz, m, n);
    const double scale = -2.0 * static_cast<double>(f.rows()) / static_cast<double>(bsz);
    for (std::size_t i = 0; i < g_pi.size(); ++i) g_pi.data()[i] *= scale;
    if (lambda != 0.0)
        kernels::smoothness_grad_acc(pi.data(), g_pi.data(), m, n, lambda);

    // Chain rule through the row-wise softmax.
    Mat g_theta(m, n);
    kernels::softmax_backward(pi.data(), g_pi.data(), g_theta.data(), m, n);
    return g_theta;
}

void adam_step(Mat& theta, AdamState& state, const Mat& grad, double lr_t,
               const FitConfig& config) {
    if (!state.m.same_shape(theta)) {
        state.m = Mat(theta.rows(), theta.cols());
        state.v = Mat(theta.rows(), theta.cols());
        state.t = 0;
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);
    kernels::adam_update(theta.data(), state.m.data(), state.v.data(), grad.data(),
                         theta.size(), config.beta1, config.beta2, bias1, bias2, lr_t,
                         config.epsilon);
}

double lr_schedule(double gamma0, double decay, std::size_t epoch) {
    return gamma0 * std::pow(decay, static_cast<double>(epoch));
}

FitResult fit(const Dataset& dataset, const ProbeSet& probes, const FitConfig& config) {
    config.validate();
    const Mat& p = dataset.probs;
    const Mat& f = probes.probe_matrix;
    if (p.rows() != f.rows())
        throw config_error("fit: dataset and probe set row counts differ");
    const std::size_t d = p.rows();
    const std::size_t m = probes.hilbert_dim;
    const std::size_t n = p.cols();

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> init(0.0, config.init_stddev);
    Mat theta(m, n);
    for (std::size_t i = 0; i < theta.size(); ++i) theta.data()[i] = init(rng);

    std::vector<std::size_t> indices(d);
    std::iota(indices.begin(), indices.end(), 0);

    FitResult result;
    result.seed = config.seed;
    result.config_echo = config;
    result.loss_history.reserve(config.epochs);
    result.wall_clock_per_iteration.reserve(config.epochs);

    AdamState state;
    Mat f_b(std::min(config.batch_size, d), m);
    Mat p_b(std::min(config.batch_size, d), n);
    Mat full_scratch(d, n);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr_t = lr_schedule(config.learning_rate, config.lr_decay, epoch);
        const auto t0 = clock_type::now();

        std::shuffle(indices.begin(), indices.end(), rng);
        for (std::size_t start = 0; start < d; start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, d - start);
            const std::span<const std::size_t> batch(indices.data() + start, len);
            const Mat grad = gd_gradient(theta, p, f, config.lambda, batch);
            adam_step(theta, state, grad, lr_t, config);
        }

        const double epoch_seconds = seconds_since(t0);
        result.wall_clock_per_iteration.push_back(epoch_seconds);
        result.wall_clock_seconds += epoch_seconds;

        // Full-data objective, recorded once per epoch (outside the timed loop).
        const Mat pi = softmax_rows(theta);
        const double loss =
            objective_from_batch(pi, p, f, d, config.lambda, full_scratch);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "fit: non-finite objective at epoch " << epoch << " (seed "
                << config.seed << ")";
            throw numeric_error(msg.str());
        }
        result.loss_history.push_back(loss);
    }

    result.pi_hat = DiagonalPovm{softmax_rows(theta)};
    return result;
}

MultiStartSummary multi_start_fit(const Dataset& dataset, const ProbeSet& probes,
                                  const FitConfig& config, std::size_t trials,
                                  const DiagonalPovm* ground_truth) {
    if (trials == 0) throw config_error("multi_start_fit: trials must be >= 1");
    MultiStartSummary summary;
    summary.results.reserve(trials);
    for (std::size_t k = 0; k < trials; ++k) {
        FitConfig trial_config = config;
        trial_config.seed = config.seed + k;
        summary.results.push_back(fit(dataset, probes, trial_config));
        if (ground_truth) {
            const FidelityReport report =
                average_fidelity(summary.results.back().pi_hat, *ground_truth);
            summary.average_fidelities.push_back(report.average);
        }
    }
    if (ground_truth) {
        const auto& fids = summary.average_fidelities;
        const double mean =
            std::accumulate(fids.begin(), fids.end(), 0.0) / static_cast<double>(trials);
        double var = 0.0;
        for (double x : fids) var += (x - mean) * (x - mean);
        summary.fidelity_mean = mean;
        summary.fidelity_stddev =
            trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
    }
    return summary;
}

}  // namespace qdt
