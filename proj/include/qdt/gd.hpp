#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdt/detector.hpp"
#include "qdt/mat.hpp"

namespace qdt {

// Unconstrained pre-softmax parameters Theta (M x N). softmax_rows(theta)
// is the row-stochastic candidate Pi.
struct Logits {
    Mat theta;
};

struct FitConfig {
    double learning_rate = 1e-2;
    double lr_decay = 0.999;   // applied once per epoch
    double beta1 = 0.9;
    double beta2 = 0.9;
    double epsilon = 1e-8;
    std::size_t epochs = 100;
    std::size_t batch_size = 25;
    double lambda = 0.0;       // next-neighbor smoothing strength
    std::uint64_t seed = 0;
    double init_stddev = 1.0;

    void validate() const;  // throws config_error
};

struct FitResult {
    DiagonalPovm pi_hat;
    std::vector<double> loss_history;              // full-data objective, one per epoch
    double wall_clock_seconds = 0.0;               // optimizer loop only
    std::vector<double> wall_clock_per_iteration;  // per epoch
    std::uint64_t seed = 0;
    FitConfig config_echo;
    std::string solver = "gd";
};

// Row-wise softmax with max subtraction; rows sum to 1 for any finite theta.
Mat softmax_rows(const Mat& theta);

// Minibatch objective (D/|B|) sum_{i in B} sum_j (P_ij - (F Pi)_ij)^2
// + lambda * smoothness(Pi), with Pi = softmax_rows(theta). With B = all
// rows this is exactly the full regularized least-squares objective.
double objective(const Mat& theta, const Mat& p, const Mat& f, double lambda,
                 std::span<const std::size_t> batch);

// Analytic gradient of `objective` w.r.t. theta (chain rule through the
// row-wise softmax).
Mat gd_gradient(const Mat& theta, const Mat& p, const Mat& f, double lambda,
                std::span<const std::size_t> batch);

// Adam first/second-moment accumulators. t counts completed steps.
struct AdamState {
    Mat m;
    Mat v;
    std::size_t t = 0;
};

// One bias-corrected Adam step at learning rate lr_t; increments state.t.
void adam_step(Mat& theta, AdamState& state, const Mat& grad, double lr_t,
               const FitConfig& config);

// gamma_t = gamma0 * decay^epoch
double lr_schedule(double gamma0, double decay, std::size_t epoch);

// Minibatched Adam descent on the softmax parametrization. Deterministic
// given (dataset, probes, config).
FitResult fit(const Dataset& dataset, const ProbeSet& probes, const FitConfig& config);

struct MultiStartSummary {
    std::vector<FitResult> results;
    // Populated when ground truth is supplied:
    std::vector<double> average_fidelities;  // one per trial
    std::optional<double> fidelity_mean;
    std::optional<double> fidelity_stddev;   // sample stddev, 0 for a single trial
};

// Repeated fits with seeds config.seed + k, k = 0..trials-1 (trial 0 is
// identical to fit() with the base seed).
MultiStartSummary multi_start_fit(const Dataset& dataset, const ProbeSet& probes,
                                  const FitConfig& config, std::size_t trials,
                                  const DiagonalPovm* ground_truth = nullptr);

}  // namespace qdt
