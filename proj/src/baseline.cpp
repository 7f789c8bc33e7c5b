#include "qdt/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <vector>

#include "qdt/errors.hpp"
#include "qdt/kernels.hpp"

namespace qdt {
namespace {

using clock_type = std::chrono::steady_clock;

}  // namespace

void BaselineConfig::validate() const {
    if (!(step_size > 0.0)) throw config_error("BaselineConfig: step_size must be > 0");
    if (!(lambda >= 0.0)) throw config_error("BaselineConfig: lambda must be >= 0");
}

std::vector<double> project_to_simplex(std::span<const double> v) {
    if (v.empty()) throw config_error("project_to_simplex: empty vector");
    for (double x : v)
        if (!std::isfinite(x)) throw numeric_error("project_to_simplex: non-finite input");

    // Sort-and-threshold: find the active set, shift it onto the simplex.
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) tau = candidate;
    }
    std::vector<double> p(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) p[i] = std::max(v[i] - tau, 0.0);
    return p;
}

void project_rows_to_simplex(Mat& pi) {
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        const auto projected =
            project_to_simplex(std::span<const double>(pi.row(i), pi.cols()));
        std::copy(projected.begin(), projected.end(), pi.row(i));
    }
}

FitResult fit_baseline(const Dataset& dataset, const ProbeSet& probes,
                       const BaselineConfig& config) {
    config.validate();
    const Mat& p = dataset.probs;
    const Mat& f = probes.probe_matrix;
    if (p.rows() != f.rows())
        throw config_error("fit_baseline: dataset and probe set row counts differ");
    const std::size_t d = p.rows();
    const std::size_t m = probes.hilbert_dim;
    const std::size_t n = p.cols();

    Mat pi(m, n, 1.0 / static_cast<double>(n));  // uniform, feasible, deterministic

    FitResult result;
    result.solver = "baseline";
    result.seed = 0;
    result.config_echo.learning_rate = config.step_size;
    result.config_echo.lr_decay = 1.0;
    result.config_echo.epochs = config.iterations;
    result.config_echo.batch_size = d;
    result.config_echo.lambda = config.lambda;
    result.config_echo.seed = 0;
    result.loss_history.reserve(config.iterations + 1);
    result.wall_clock_per_iteration.reserve(config.iterations);

    Mat q(d, n);   // F Pi
    Mat r(d, n);   // P - F Pi
    Mat g(m, n);

    const auto record_loss = [&](const Mat& fpi) {
        double loss = kernels::sum_sq_diff(p.data(), fpi.data(), d * n);
        if (config.lambda != 0.0)
            loss += config.lambda * kernels::smoothness_penalty(pi.data(), m, n);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "fit_baseline: non-finite objective at iteration "
                << result.loss_history.size();
            throw numeric_error(msg.str());
        }
        result.loss_history.push_back(loss);
    };

    kernels::matmul(f.data(), pi.data(), q.data(), d, m, n);
    record_loss(q);

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto t0 = clock_type::now();

        kernels::sub(p.data(), q.data(), r.data(), d * n);
        kernels::matmul_at_b(f.data(), r.data(), g.data(), d, m, n);
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= -2.0;
        if (config.lambda != 0.0)
            kernels::smoothness_grad_acc(pi.data(), g.data(), m, n, config.lambda);

        for (std::size_t i = 0; i < pi.size(); ++i)
            pi.data()[i] -= config.step_size * g.data()[i];
        project_rows_to_simplex(pi);

        kernels::matmul(f.data(), pi.data(), q.data(), d, m, n);

        const double it_seconds =
            std::chrono::duration<double>(clock_type::now() - t0).count();
        result.wall_clock_per_iteration.push_back(it_seconds);
        result.wall_clock_seconds += it_seconds;

        record_loss(q);
    }

    result.pi_hat = DiagonalPovm{std::move(pi)};
    return result;
}

}  // namespace qdt
