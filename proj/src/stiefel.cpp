#include "qdt/stiefel.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "qdt/errors.hpp"

namespace qdt {
namespace {

using clock_type = std::chrono::steady_clock;

std::size_t total_rank(const std::vector<std::size_t>& ranks) {
    return std::accumulate(ranks.begin(), ranks.end(), std::size_t{0});
}

// M x D matrix whose column i is the truncated coherent vector a_i.
Eigen::MatrixXcd amplitude_columns(const std::vector<std::pair<double, double>>& probes,
                                   std::size_t hilbert_dim) {
    Eigen::MatrixXcd a(hilbert_dim, probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto vec =
            coherent_amplitude_vector(probes[i].first, probes[i].second, hilbert_dim);
        for (std::size_t k = 0; k < hilbert_dim; ++k)
            a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = vec[k];
    }
    return a;
}

Mat block_squared_norms(const StiefelPoint& point, const Eigen::MatrixXcd& y) {
    const std::size_t d = static_cast<std::size_t>(y.cols());
    const std::size_t n = point.num_outcomes();
    Mat probs(d, n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto rows = point.block_ranks[j];
        const auto start = point.block_row(j);
        for (std::size_t i = 0; i < d; ++i)
            probs(i, j) = y.block(static_cast<Eigen::Index>(start),
                                  static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(rows), 1)
                              .squaredNorm();
    }
    return probs;
}

void check_data(const StiefelPoint& point, const PhaseSensitiveDataset& data) {
    if (data.probs.rows() != data.probe_amplitudes.size())
        throw config_error("stiefel: dataset rows and probe list length differ");
    if (data.probs.cols() != point.num_outcomes())
        throw config_error("stiefel: dataset outcomes and block count differ");
}

}  // namespace

std::size_t StiefelPoint::block_row(std::size_t j) const {
    std::size_t row = 0;
    for (std::size_t i = 0; i < j; ++i) row += block_ranks[i];
    return row;
}

Eigen::MatrixXcd StiefelPoint::block(std::size_t j) const {
    return w.middleRows(static_cast<Eigen::Index>(block_row(j)),
                        static_cast<Eigen::Index>(block_ranks[j]));
}

Eigen::MatrixXcd StiefelPoint::povm_element(std::size_t j) const {
    const Eigen::MatrixXcd wj = block(j);
    return wj.adjoint() * wj;
}

double StiefelPoint::orthonormality_defect() const {
    const Eigen::Index m = static_cast<Eigen::Index>(hilbert_dim);
    return (w.adjoint() * w - Eigen::MatrixXcd::Identity(m, m)).norm();
}

StiefelPoint random_stiefel(const std::vector<std::size_t>& block_ranks,
                            std::size_t hilbert_dim, std::uint64_t seed) {
    if (block_ranks.empty()) throw config_error("random_stiefel: no blocks");
    for (std::size_t r : block_ranks)
        if (r == 0) throw config_error("random_stiefel: block ranks must be positive");
    const std::size_t k = total_rank(block_ranks);
    if (k < hilbert_dim)
        throw config_error(
            "random_stiefel: sum of block ranks must be >= hilbert_dim for completeness");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hilbert_dim));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            g(i, j) = std::complex<double>(re, im);
        }

    // Thin QR: K x M factor with orthonormal columns.
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    const Eigen::MatrixXcd q =
        qr.householderQ() * Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(k),
                                                       static_cast<Eigen::Index>(hilbert_dim));

    StiefelPoint point{q, block_ranks, hilbert_dim};
    return point;
}

Mat predicted_probs(const StiefelPoint& point,
                    const std::vector<std::pair<double, double>>& probes) {
    const Eigen::MatrixXcd a = amplitude_columns(probes, point.hilbert_dim);
    const Eigen::MatrixXcd y = point.w * a;  // K x D
    return block_squared_norms(point, y);
}

double stiefel_loss(const StiefelPoint& point, const PhaseSensitiveDataset& data) {
    check_data(point, data);
    const Mat predicted = predicted_probs(point, data.probe_amplitudes);
    double loss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double diff = predicted.data()[i] - data.probs.data()[i];
        loss += diff * diff;
    }
    return loss;
}

Eigen::MatrixXcd euclidean_gradient(const StiefelPoint& point,
                                    const PhaseSensitiveDataset& data) {
    check_data(point, data);
    const std::size_t d = data.probe_amplitudes.size();
    const Eigen::MatrixXcd a = amplitude_columns(data.probe_amplitudes, point.hilbert_dim);
    const Eigen::MatrixXcd y = point.w * a;  // K x D, column i = W a_i
    const Mat predicted = block_squared_norms(point, y);

    // Block j: 2 sum_i (p_ij - P_ij) (W_j a_i) a_i^dag. Assembled as a scaled
    // product Y_s A^dag with the block's residuals as column scalings.
    Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(point.w.rows(), point.w.cols());
    for (std::size_t j = 0; j < point.num_outcomes(); ++j) {
        const auto start = static_cast<Eigen::Index>(point.block_row(j));
        const auto rows = static_cast<Eigen::Index>(point.block_ranks[j]);
        Eigen::MatrixXcd scaled(rows, static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            const double residual = predicted(i, j) - data.probs(i, j);
            scaled.col(static_cast<Eigen::Index>(i)) =
                (2.0 * residual) * y.block(start, static_cast<Eigen::Index>(i), rows, 1);
        }
        grad.middleRows(start, rows) = scaled * a.adjoint();
    }
    return grad;
}

StiefelPoint riemannian_step(const StiefelPoint& point, const Eigen::MatrixXcd& grad,
                             double gamma) {
    if (!(gamma > 0.0)) throw config_error("riemannian_step: gamma must be > 0");
    if (grad.rows() != point.w.rows() || grad.cols() != point.w.cols())
        throw config_error("riemannian_step: gradient shape mismatch");

    const double norm = grad.norm();
    if (norm == 0.0) return point;

    const Eigen::Index k = point.w.rows();
    const Eigen::Index m = point.w.cols();
    const Eigen::MatrixXcd g = grad / norm;

    Eigen::MatrixXcd a(k, 2 * m);  // [G, W]
    a.leftCols(m) = g;
    a.rightCols(m) = point.w;
    Eigen::MatrixXcd b(k, 2 * m);  // [W, -G]
    b.leftCols(m) = point.w;
    b.rightCols(m) = -g;

    const Eigen::MatrixXcd bt_a = b.adjoint() * a;        // 2M x 2M
    const Eigen::MatrixXcd bt_w = b.adjoint() * point.w;  // 2M x M

    double gamma_try = gamma;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const Eigen::MatrixXcd system =
            Eigen::MatrixXcd::Identity(2 * m, 2 * m) + (gamma_try / 2.0) * bt_a;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
        const Eigen::MatrixXcd x = lu.solve(bt_w);

        // Reject on a singular or badly conditioned solve.
        const double residual = (system * x - bt_w).norm();
        if (!std::isfinite(residual) || residual > 1e-8 * (1.0 + bt_w.norm())) {
            gamma_try *= 0.5;
            continue;
        }

        StiefelPoint next{point.w - gamma_try * (a * x), point.block_ranks,
                          point.hilbert_dim};
        if (next.orthonormality_defect() > 1e-8) {
            gamma_try *= 0.5;
            continue;
        }
        return next;
    }
    throw numeric_error("riemannian_step: singular update system after 10 halvings");
}

void StiefelFitConfig::validate(std::size_t hilbert_dim) const {
    if (block_ranks.empty())
        throw config_error("StiefelFitConfig: block_ranks must be non-empty");
    if (total_rank(block_ranks) < hilbert_dim)
        throw config_error("StiefelFitConfig: sum of block ranks must be >= hilbert_dim");
    if (!(gamma > 0.0)) throw config_error("StiefelFitConfig: gamma must be > 0");
}

StiefelFitResult fit_phase_sensitive(const PhaseSensitiveDataset& data,
                                     std::size_t hilbert_dim,
                                     const StiefelFitConfig& config) {
    config.validate(hilbert_dim);
    StiefelFitResult result;
    result.config_echo = config;
    result.point = random_stiefel(config.block_ranks, hilbert_dim, config.seed);
    check_data(result.point, data);

    result.loss_history.reserve(config.iterations + 1);
    result.loss_history.push_back(stiefel_loss(result.point, data));
    result.wall_clock_per_iteration.reserve(config.iterations);

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto t0 = clock_type::now();
        const Eigen::MatrixXcd grad = euclidean_gradient(result.point, data);
        result.point = riemannian_step(result.point, grad, config.gamma);
        const double it_seconds =
            std::chrono::duration<double>(clock_type::now() - t0).count();
        result.wall_clock_per_iteration.push_back(it_seconds);
        result.wall_clock_seconds += it_seconds;

        const double loss = stiefel_loss(result.point, data);
        if (!std::isfinite(loss))
            throw numeric_error("fit_phase_sensitive: non-finite loss");
        result.loss_history.push_back(loss);
    }
    return result;
}

PhaseSensitiveDataset simulate_phase_sensitive(
    const StiefelPoint& truth, const std::vector<std::pair<double, double>>& probes) {
    PhaseSensitiveDataset data;
    data.probe_amplitudes = probes;
    data.probs = predicted_probs(truth, probes);
    return data;
}

StiefelPoint stiefel_from_diagonal(const DiagonalPovm& povm) {
    const std::size_t m = povm.hilbert_dim();
    const std::size_t n = povm.num_outcomes();
    StiefelPoint point;
    point.hilbert_dim = m;
    point.block_ranks.assign(n, m);
    point.w = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n * m),
                                     static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i)
            point.w(static_cast<Eigen::Index>(j * m + i), static_cast<Eigen::Index>(i)) =
                std::sqrt(povm.pi(i, j));
    return point;
}

std::vector<std::pair<double, double>> phase_probe_grid(std::size_t num_amplitudes,
                                                        std::size_t num_phases,
                                                        std::size_t hilbert_dim,
                                                        double tail_bound) {
    if (num_amplitudes < 2 || num_phases < 1)
        throw config_error("phase_probe_grid: need >= 2 amplitudes and >= 1 phase");
    const double mu_max = max_mean_photon(hilbert_dim, tail_bound);
    std::vector<std::pair<double, double>> grid;
    grid.reserve(num_amplitudes * num_phases);
    const double two_pi = 2.0 * M_PI;
    for (std::size_t i = 0; i < num_amplitudes; ++i) {
        const double mu =
            static_cast<double>(i) * mu_max / static_cast<double>(num_amplitudes - 1);
        for (std::size_t p = 0; p < num_phases; ++p)
            grid.emplace_back(mu, two_pi * static_cast<double>(p) /
                                      static_cast<double>(num_phases));
    }
    return grid;
}

}  // namespace qdt
