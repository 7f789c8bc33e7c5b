#pragma once

#include <cstddef>

namespace qdt::kernels::detail {

// One entry per kernel; each backend fills a table with its variants.
struct KernelTable {
    void (*exp_array)(const double*, double*, std::size_t);
    void (*softmax_rows)(const double*, double*, std::size_t, std::size_t);
    void (*matmul)(const double*, const double*, double*, std::size_t, std::size_t,
                   std::size_t);
    void (*matmul_at_b)(const double*, const double*, double*, std::size_t, std::size_t,
                        std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    double (*sum_sq_diff)(const double*, const double*, std::size_t);
    void (*adam_update)(double*, double*, double*, const double*, std::size_t, double,
                        double, double, double, double, double);
    void (*softmax_backward)(const double*, const double*, double*, std::size_t,
                             std::size_t);
    double (*smoothness_penalty)(const double*, std::size_t, std::size_t);
    void (*smoothness_grad_acc)(const double*, double*, std::size_t, std::size_t, double);
};

const KernelTable& scalar_table();

#if defined(QDT_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace qdt::kernels::detail
