#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "qdt/detector.hpp"

namespace qdt {

struct FidelityReport {
    std::vector<double> per_element;   // 0 placeholder where undefined
    std::vector<bool> defined;         // false: zero-trace element, fidelity undefined
    double average = 0.0;              // mean over defined elements
    std::size_t num_undefined = 0;

    bool all_defined() const { return num_undefined == 0; }
};

// Fidelity between two commuting PSD operators given by their diagonals:
// (sum_i sqrt(p_i q_i))^2 / (sum p * sum q). Throws numeric_error on a
// zero-trace input instead of propagating NaN.
double diagonal_fidelity(std::span<const double> p, std::span<const double> q);

// Literal evaluation of Tr^2[sqrt(sqrt(A) B sqrt(A))] / (Tr A Tr B) via
// eigendecompositions. Eigenvalues below -1e-9 are rejected as non-PSD;
// small negative rounding noise above that is clamped to 0.
double matrix_fidelity_oracle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);
double matrix_fidelity_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Column-wise diagonal_fidelity between two POVMs of the same shape. Zero
// columns are flagged undefined and excluded from the average.
FidelityReport average_fidelity(const DiagonalPovm& estimate, const DiagonalPovm& truth);

}  // namespace qdt
