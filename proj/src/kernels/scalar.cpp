// Scalar reference kernels. Plain loops in a fixed summation order; the SIMD
// variants are equivalence-tested against these.

#include <cmath>
#include <cstring>

#include "table.hpp"

namespace qdt::kernels::detail {
namespace {

void exp_array_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void softmax_rows_scalar(const double* theta, double* out, std::size_t rows,
                         std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* t = theta + i * cols;
        double* o = out + i * cols;
        double mx = t[0];
        for (std::size_t j = 1; j < cols; ++j) mx = t[j] > mx ? t[j] : mx;
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            o[j] = std::exp(t[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < cols; ++j) o[j] /= sum;
    }
}

void matmul_scalar(const double* a, const double* b, double* c, std::size_t n,
                   std::size_t k, std::size_t m) {
    std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_at_b_scalar(const double* a, const double* b, double* c, std::size_t k,
                        std::size_t n, std::size_t m) {
    std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * n;
        const double* brow = b + kk * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = arow[i];
            double* crow = c + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void sub_scalar(const double* a, const double* b, double* r, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) r[i] = a[i] - b[i];
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void adam_update_scalar(double* theta, double* m, double* v, const double* g,
                        std::size_t n, double beta1, double beta2, double bias1,
                        double bias2, double lr, double eps) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void softmax_backward_scalar(const double* p, const double* gp, double* gt,
                             std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* pr = p + i * cols;
        const double* gr = gp + i * cols;
        double* outr = gt + i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * pr[j];
        for (std::size_t j = 0; j < cols; ++j) outr[j] = pr[j] * (gr[j] - dot);
    }
}

double smoothness_penalty_scalar(const double* p, std::size_t rows, std::size_t cols) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < rows; ++i)
        s += sum_sq_diff_scalar(p + i * cols, p + (i + 1) * cols, cols);
    return s;
}

void smoothness_grad_acc_scalar(const double* p, double* g, std::size_t rows,
                                std::size_t cols, double lambda) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* pi = p + i * cols;
        const double* up = i > 0 ? p + (i - 1) * cols : nullptr;
        const double* dn = i + 1 < rows ? p + (i + 1) * cols : nullptr;
        double* gi = g + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            if (dn) acc += 2.0 * (pi[j] - dn[j]);
            if (up) acc += 2.0 * (pi[j] - up[j]);
            gi[j] += lambda * acc;
        }
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        exp_array_scalar,       softmax_rows_scalar,    matmul_scalar,
        matmul_at_b_scalar,     sub_scalar,             sum_sq_diff_scalar,
        adam_update_scalar,     softmax_backward_scalar, smoothness_penalty_scalar,
        smoothness_grad_acc_scalar,
    };
    return t;
}

}  // namespace qdt::kernels::detail
