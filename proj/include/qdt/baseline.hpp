#pragma once

#include <span>
#include <vector>

#include "qdt/gd.hpp"

namespace qdt {

// Full-batch projected gradient descent on the same objective, standing in
// for the interior-point CCO solver the method is benchmarked against.
struct BaselineConfig {
    double step_size = 1e-3;
    std::size_t iterations = 2000;
    double lambda = 0.0;

    void validate() const;  // throws config_error
};

// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> project_to_simplex(std::span<const double> v);

// Project every row of pi onto the simplex in place.
void project_rows_to_simplex(Mat& pi);

// Deterministic: starts from the uniform Pi = 1/N, no randomness anywhere.
// loss_history holds the full objective at the initial point and after each
// iteration (length iterations + 1). The FitConfig echo maps step_size onto
// learning_rate and iterations onto epochs so the result shape matches the
// gd solver's.
FitResult fit_baseline(const Dataset& dataset, const ProbeSet& probes,
                       const BaselineConfig& config);

}  // namespace qdt
