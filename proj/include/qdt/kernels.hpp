#pragma once

#include <cstddef>
#include <string>

namespace qdt::kernels {

// The arithmetic inner loops of the solvers exist in a scalar reference
// version and SIMD variants. The active variant is picked at runtime from
// CPU capabilities and can be forced (e.g. for equivalence testing or to
// pin results to the scalar reference).
enum class Backend { scalar, avx2 };

bool backend_available(Backend b);
Backend active_backend();
void force_backend(Backend b);  // throws config_error if unavailable
void reset_backend();           // back to auto-detection
const char* backend_name(Backend b);
Backend backend_from_name(const std::string& name);  // "scalar" | "avx2" | "auto"->active

// y[i] = exp(x[i]). Inputs clamped to the representable range; x <= -746
// underflows to 0, x >= 709.8 saturates to +inf.
void exp_array(const double* x, double* y, std::size_t n);

// Row-wise softmax with per-row max subtraction. out must not alias theta.
void softmax_rows(const double* theta, double* out, std::size_t rows, std::size_t cols);

// c(n x m) = a(n x k) * b(k x m), all row-major.
void matmul(const double* a, const double* b, double* c,
            std::size_t n, std::size_t k, std::size_t m);

// c(n x m) = a^T * b with a stored (k x n) and b (k x m), row-major.
void matmul_at_b(const double* a, const double* b, double* c,
                 std::size_t k, std::size_t n, std::size_t m);

// r[i] = a[i] - b[i]
void sub(const double* a, const double* b, double* r, std::size_t n);

// sum_i (a[i] - b[i])^2
double sum_sq_diff(const double* a, const double* b, std::size_t n);

// Fused Adam update with bias correction factors bias1 = 1 - beta1^t,
// bias2 = 1 - beta2^t precomputed by the caller.
void adam_update(double* theta, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double bias1, double bias2,
                 double lr, double eps);

// Backprop of a loss gradient gp (w.r.t. softmax output p) through the
// row-wise softmax: gt = p .* (gp - rowdot(gp, p)).
void softmax_backward(const double* p, const double* gp, double* gt,
                      std::size_t rows, std::size_t cols);

// Next-neighbor smoothness penalty sum_j sum_{i<rows-1} (p[i,j] - p[i+1,j])^2.
double smoothness_penalty(const double* p, std::size_t rows, std::size_t cols);

// g += lambda * d(smoothness_penalty)/dp
void smoothness_grad_acc(const double* p, double* g,
                         std::size_t rows, std::size_t cols, double lambda);

}  // namespace qdt::kernels
