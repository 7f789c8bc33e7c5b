#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qdt/detector.hpp"
#include "qdt/mat.hpp"

namespace qdt {

// Phase-sensitive POVM parametrized by a point on the complex Stiefel
// manifold: blocks W_j (r_j x M) stacked into W (K x M, K = sum r_j) with
// W^dag W = I_M. Element j is recovered as E_j = W_j^dag W_j, Hermitian PSD
// of rank <= r_j by construction.
struct StiefelPoint {
    Eigen::MatrixXcd w;                    // K x M
    std::vector<std::size_t> block_ranks;  // r_j, one per outcome
    std::size_t hilbert_dim = 0;           // M

    std::size_t num_outcomes() const { return block_ranks.size(); }
    std::size_t block_row(std::size_t j) const;
    Eigen::MatrixXcd block(std::size_t j) const;         // r_j x M
    Eigen::MatrixXcd povm_element(std::size_t j) const;  // W_j^dag W_j
    double orthonormality_defect() const;                // ||W^dag W - I||_F
};

// Outcome statistics from pure coherent probes (mu_i, phi_i).
struct PhaseSensitiveDataset {
    Mat probs;                                               // D x N
    std::vector<std::pair<double, double>> probe_amplitudes; // (mu, phase)
};

// Orthonormalized complex Gaussian start; throws config_error if sum r_j < M.
StiefelPoint random_stiefel(const std::vector<std::size_t>& block_ranks,
                            std::size_t hilbert_dim, std::uint64_t seed);

// p_ij = ||W_j a_i||^2 for truncated coherent vectors a_i. Row i sums to
// ||a_i||^2 = Phi(M-1; mu_i) by completeness.
Mat predicted_probs(const StiefelPoint& point,
                    const std::vector<std::pair<double, double>>& probes);

// sum_ij (p_ij - P_ij)^2
double stiefel_loss(const StiefelPoint& point, const PhaseSensitiveDataset& data);

// Block j equals 2 sum_i (p_ij - P_ij) (W_j a_i) a_i^dag; the conjugate
// Wirtinger gradient, so the loss changes by 2 Re<G, dW> to first order and
// a small step along -G descends.
Eigen::MatrixXcd euclidean_gradient(const StiefelPoint& point,
                                    const PhaseSensitiveDataset& data);

// Cayley-style feasible update: G = grad/||grad||_F, A = [G, W], B = [W, -G],
// W' = W - gamma A (I + (gamma/2) B^dag A)^{-1} B^dag W. Stays on the
// manifold for any gamma; a singular system is retried with halved gamma up
// to 10 times before failing. A zero gradient returns the point unchanged.
StiefelPoint riemannian_step(const StiefelPoint& point, const Eigen::MatrixXcd& grad,
                             double gamma);

struct StiefelFitConfig {
    std::vector<std::size_t> block_ranks;
    std::size_t iterations = 2000;
    double gamma = 0.05;  // fixed step; only halved transiently on singular systems
    std::uint64_t seed = 0;

    void validate(std::size_t hilbert_dim) const;
};

struct StiefelFitResult {
    StiefelPoint point;
    std::vector<double> loss_history;  // initial loss plus one entry per iteration
    double wall_clock_seconds = 0.0;
    std::vector<double> wall_clock_per_iteration;
    StiefelFitConfig config_echo;
};

// Full-batch Riemannian descent from a random start.
StiefelFitResult fit_phase_sensitive(const PhaseSensitiveDataset& data,
                                     std::size_t hilbert_dim,
                                     const StiefelFitConfig& config);

// Noiseless forward model P = predicted_probs(truth).
PhaseSensitiveDataset simulate_phase_sensitive(
    const StiefelPoint& truth, const std::vector<std::pair<double, double>>& probes);

// Exact Stiefel representation of a diagonal POVM: block j = diag(sqrt(col j)),
// rank M each. Ground truth for phase-sensitive experiments.
StiefelPoint stiefel_from_diagonal(const DiagonalPovm& povm);

// Product grid of evenly spaced mean photon numbers on [0, max_mean_photon]
// and evenly spaced phases on [0, 2pi).
std::vector<std::pair<double, double>> phase_probe_grid(std::size_t num_amplitudes,
                                                        std::size_t num_phases,
                                                        std::size_t hilbert_dim,
                                                        double tail_bound = 1e-5);

}  // namespace qdt
