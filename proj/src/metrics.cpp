#include "qdt/metrics.hpp"

#include <cmath>
#include <complex>

#include "qdt/errors.hpp"

namespace qdt {
namespace {

constexpr double kPsdEigTolerance = 1e-9;

// Hermitian square root via eigendecomposition, clamping rounding noise.
template <typename MatrixType>
MatrixType psd_sqrt(const MatrixType& a, const char* label) {
    Eigen::SelfAdjointEigenSolver<MatrixType> eig(a);
    if (eig.info() != Eigen::Success)
        throw numeric_error(std::string("matrix_fidelity_oracle: eigensolver failed for ") +
                            label);
    Eigen::VectorXd vals = eig.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -kPsdEigTolerance)
            throw std::domain_error(
                std::string("matrix_fidelity_oracle: input not PSD: ") + label);
        if (vals[i] < 0.0) vals[i] = 0.0;
    }
    return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal() *
           eig.eigenvectors().adjoint();
}

template <typename MatrixType>
double fidelity_impl(const MatrixType& a, const MatrixType& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw config_error("matrix_fidelity_oracle: shape mismatch");
    const double trace_a = std::real(a.trace());
    const double trace_b = std::real(b.trace());
    if (!(trace_a > 0.0) || !(trace_b > 0.0))
        throw numeric_error("matrix_fidelity_oracle: zero-trace input, fidelity undefined");

    const MatrixType sqrt_a = psd_sqrt(a, "A");
    const MatrixType inner = sqrt_a * b * sqrt_a;

    Eigen::SelfAdjointEigenSolver<MatrixType> eig(inner);
    if (eig.info() != Eigen::Success)
        throw numeric_error("matrix_fidelity_oracle: eigensolver failed for sqrt(A) B sqrt(A)");
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        double v = eig.eigenvalues()[i];
        if (v < -kPsdEigTolerance)
            throw std::domain_error("matrix_fidelity_oracle: inner matrix not PSD");
        trace_sqrt += std::sqrt(std::max(v, 0.0));
    }
    return trace_sqrt * trace_sqrt / (trace_a * trace_b);
}

}  // namespace

double diagonal_fidelity(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw config_error("diagonal_fidelity: length mismatch");
    if (p.empty()) throw config_error("diagonal_fidelity: empty input");
    double sum_p = 0.0, sum_q = 0.0, overlap = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pi = p[i], qi = q[i];
        if (pi < 0.0 || qi < 0.0) {
            // Rounding noise is clamped; genuinely negative entries rejected.
            if (pi < -kPsdEigTolerance || qi < -kPsdEigTolerance)
                throw std::domain_error("diagonal_fidelity: negative entry");
            pi = std::max(pi, 0.0);
            qi = std::max(qi, 0.0);
        }
        sum_p += pi;
        sum_q += qi;
        overlap += std::sqrt(pi * qi);
    }
    if (!(sum_p > 0.0) || !(sum_q > 0.0))
        throw numeric_error("diagonal_fidelity: zero-trace input, fidelity undefined");
    return overlap * overlap / (sum_p * sum_q);
}

double matrix_fidelity_oracle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return fidelity_impl(a, b);
}

double matrix_fidelity_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return fidelity_impl(a, b);
}

FidelityReport average_fidelity(const DiagonalPovm& estimate, const DiagonalPovm& truth) {
    if (estimate.hilbert_dim() != truth.hilbert_dim() ||
        estimate.num_outcomes() != truth.num_outcomes())
        throw config_error("average_fidelity: POVM shapes differ");

    const std::size_t m = estimate.hilbert_dim();
    const std::size_t n = estimate.num_outcomes();
    FidelityReport report;
    report.per_element.assign(n, 0.0);
    report.defined.assign(n, false);

    std::vector<double> p(m), q(m);
    double sum = 0.0;
    std::size_t defined_count = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double trace_p = 0.0, trace_q = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            p[i] = estimate.pi(i, j);
            q[i] = truth.pi(i, j);
            trace_p += p[i];
            trace_q += q[i];
        }
        if (!(trace_p > 0.0) || !(trace_q > 0.0)) {
            ++report.num_undefined;  // flagged; excluded from the average
            continue;
        }
        report.per_element[j] = diagonal_fidelity(p, q);
        report.defined[j] = true;
        sum += report.per_element[j];
        ++defined_count;
    }
    if (defined_count == 0)
        throw numeric_error("average_fidelity: every element has zero trace");
    report.average = sum / static_cast<double>(defined_count);
    return report;
}

}  // namespace qdt
