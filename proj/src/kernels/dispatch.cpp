#include "qdt/kernels.hpp"

#include <optional>

#include "qdt/errors.hpp"
#include "table.hpp"

namespace qdt::kernels {
namespace {

std::optional<Backend> g_forced;

Backend detect() {
#if defined(QDT_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Backend::avx2;
#endif
    return Backend::scalar;
}

const detail::KernelTable& table_for(Backend b) {
    switch (b) {
        case Backend::scalar:
            return detail::scalar_table();
#if defined(QDT_HAVE_AVX2)
        case Backend::avx2:
            return detail::avx2_table();
#endif
        default:
            throw config_error("kernel backend not compiled in");
    }
}

const detail::KernelTable& active() { return table_for(active_backend()); }

}  // namespace

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
#if defined(QDT_HAVE_AVX2)
    if (b == Backend::avx2)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#endif
    return false;
}

Backend active_backend() { return g_forced ? *g_forced : detect(); }

void force_backend(Backend b) {
    if (!backend_available(b))
        throw config_error(std::string("kernel backend unavailable: ") + backend_name(b));
    g_forced = b;
}

void reset_backend() { g_forced.reset(); }

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

Backend backend_from_name(const std::string& name) {
    if (name == "auto") return detect();
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    throw config_error("unknown kernel backend: " + name);
}

void exp_array(const double* x, double* y, std::size_t n) {
    active().exp_array(x, y, n);
}

void softmax_rows(const double* theta, double* out, std::size_t rows, std::size_t cols) {
    active().softmax_rows(theta, out, rows, cols);
}

void matmul(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
            std::size_t m) {
    active().matmul(a, b, c, n, k, m);
}

void matmul_at_b(const double* a, const double* b, double* c, std::size_t k,
                 std::size_t n, std::size_t m) {
    active().matmul_at_b(a, b, c, k, n, m);
}

void sub(const double* a, const double* b, double* r, std::size_t n) {
    active().sub(a, b, r, n);
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
    return active().sum_sq_diff(a, b, n);
}

void adam_update(double* theta, double* m, double* v, const double* g, std::size_t n,
                 double beta1, double beta2, double bias1, double bias2, double lr,
                 double eps) {
    active().adam_update(theta, m, v, g, n, beta1, beta2, bias1, bias2, lr, eps);
}

void softmax_backward(const double* p, const double* gp, double* gt, std::size_t rows,
                      std::size_t cols) {
    active().softmax_backward(p, gp, gt, rows, cols);
}

double smoothness_penalty(const double* p, std::size_t rows, std::size_t cols) {
    return active().smoothness_penalty(p, rows, cols);
}

void smoothness_grad_acc(const double* p, double* g, std::size_t rows, std::size_t cols,
                         double lambda) {
    active().smoothness_grad_acc(p, g, rows, cols, lambda);
}

}  // namespace qdt::kernels
