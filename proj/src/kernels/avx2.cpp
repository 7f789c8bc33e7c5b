// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma and is only reached through the dispatch table after a
// runtime CPU check.

#include <cmath>
#include <cstring>
#include <immintrin.h>

#include "table.hpp"

namespace qdt::kernels::detail {
namespace {

// exp for 4 doubles: Cody-Waite range reduction, degree-13 Taylor on
// [-ln2/2, ln2/2], reconstruction by two half-exponent scalings so gradual
// underflow survives down to the subnormal range.
inline __m256d exp4(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d overflow_x = _mm256_set1_pd(709.782712893384);
    const __m256d underflow_x = _mm256_set1_pd(-745.2);

    const __m256d zero_mask = _mm256_cmp_pd(x, underflow_x, _CMP_LT_OQ);
    const __m256d inf_mask = _mm256_cmp_pd(x, overflow_x, _CMP_GT_OQ);
    __m256d xc = _mm256_max_pd(_mm256_min_pd(x, overflow_x), underflow_x);

    const __m256d nf = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(nf, ln2_hi, xc);
    r = _mm256_fnmadd_pd(nf, ln2_lo, r);

    // q = 1/2 + r/6 + ... + r^11/13!; exp(r) = 1 + r + r^2 q
    __m256d q = _mm256_set1_pd(1.0 / 6227020800.0);
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 479001600.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 39916800.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 3628800.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 362880.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 40320.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 5040.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 720.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 120.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 24.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 6.0));
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(0.5));
    const __m256d rr = _mm256_mul_pd(r, r);
    __m256d p = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_fmadd_pd(q, rr, r));

    // scale by 2^n = 2^n1 * 2^n2, n1 = n >> 1, n2 = n - n1
    const __m128i n32 = _mm256_cvtpd_epi32(nf);
    const __m128i n32_1 = _mm_srai_epi32(n32, 1);
    const __m128i n32_2 = _mm_sub_epi32(n32, n32_1);
    const __m256i bias = _mm256_set1_epi64x(1023);
    const __m256i e1 = _mm256_slli_epi64(
        _mm256_add_epi64(_mm256_cvtepi32_epi64(n32_1), bias), 52);
    const __m256i e2 = _mm256_slli_epi64(
        _mm256_add_epi64(_mm256_cvtepi32_epi64(n32_2), bias), 52);
    p = _mm256_mul_pd(_mm256_mul_pd(p, _mm256_castsi256_pd(e1)),
                      _mm256_castsi256_pd(e2));

    p = _mm256_andnot_pd(zero_mask, p);
    p = _mm256_blendv_pd(p, _mm256_set1_pd(HUGE_VAL), inf_mask);
    return p;
}

void exp_array_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = std::exp(x[i]);
}

inline double hadd4(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void softmax_rows_avx2(const double* theta, double* out, std::size_t rows,
                       std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* t = theta + i * cols;
        double* o = out + i * cols;

        std::size_t j = 0;
        double mx;
        if (cols >= 4) {
            __m256d vmax = _mm256_loadu_pd(t);
            for (j = 4; j + 4 <= cols; j += 4)
                vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(t + j));
            const __m128d m2 = _mm_max_pd(_mm256_castpd256_pd128(vmax),
                                          _mm256_extractf128_pd(vmax, 1));
            mx = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
        } else {
            mx = t[0];
            j = 1;
        }
        for (; j < cols; ++j) mx = t[j] > mx ? t[j] : mx;

        const __m256d vmx = _mm256_set1_pd(mx);
        __m256d vsum = _mm256_setzero_pd();
        for (j = 0; j + 4 <= cols; j += 4) {
            const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(t + j), vmx));
            _mm256_storeu_pd(o + j, e);
            vsum = _mm256_add_pd(vsum, e);
        }
        double sum = hadd4(vsum);
        for (; j < cols; ++j) {
            o[j] = std::exp(t[j] - mx);
            sum += o[j];
        }

        const __m256d vs = _mm256_set1_pd(sum);
        for (j = 0; j + 4 <= cols; j += 4)
            _mm256_storeu_pd(o + j, _mm256_div_pd(_mm256_loadu_pd(o + j), vs));
        for (; j < cols; ++j) o[j] /= sum;
    }
}

void matmul_avx2(const double* a, const double* b, double* c, std::size_t n,
                 std::size_t k, std::size_t m) {
    std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * m;
            const __m256d va = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4) {
                const __m256d vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j),
                                                   _mm256_loadu_pd(crow + j));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_at_b_avx2(const double* a, const double* b, double* c, std::size_t k,
                      std::size_t n, std::size_t m) {
    std::memset(c, 0, n * m * sizeof(double));
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * n;
        const double* brow = b + kk * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = arow[i];
            double* crow = c + i * m;
            const __m256d va = _mm256_set1_pd(av);
            std::size_t j = 0;
            for (; j + 4 <= m; j += 4) {
                const __m256d vc = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j),
                                                   _mm256_loadu_pd(crow + j));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

void sub_avx2(const double* a, const double* b, double* r, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(r + i,
                         _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) r[i] = a[i] - b[i];
}

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hadd4(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void adam_update_avx2(double* theta, double* m, double* v, const double* g,
                      std::size_t n, double beta1, double beta2, double bias1,
                      double bias2, double lr, double eps) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vib1 = _mm256_set1_pd(bias1);
    const __m256d vib2 = _mm256_set1_pd(bias2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vc1, vg));
        vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(vm, vib1);
        const __m256d vhat = _mm256_div_pd(vv, vib2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(theta + i, _mm256_sub_pd(_mm256_loadu_pd(theta + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        theta[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
    }
}

void softmax_backward_avx2(const double* p, const double* gp, double* gt,
                           std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* pr = p + i * cols;
        const double* gr = gp + i * cols;
        double* outr = gt + i * cols;
        __m256d vdot = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4)
            vdot = _mm256_fmadd_pd(_mm256_loadu_pd(gr + j), _mm256_loadu_pd(pr + j), vdot);
        double dot = hadd4(vdot);
        for (; j < cols; ++j) dot += gr[j] * pr[j];

        const __m256d vd = _mm256_set1_pd(dot);
        for (j = 0; j + 4 <= cols; j += 4) {
            const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(gr + j), vd);
            _mm256_storeu_pd(outr + j, _mm256_mul_pd(_mm256_loadu_pd(pr + j), t));
        }
        for (; j < cols; ++j) outr[j] = pr[j] * (gr[j] - dot);
    }
}

double smoothness_penalty_avx2(const double* p, std::size_t rows, std::size_t cols) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < rows; ++i)
        s += sum_sq_diff_avx2(p + i * cols, p + (i + 1) * cols, cols);
    return s;
}

void smoothness_grad_acc_avx2(const double* p, double* g, std::size_t rows,
                              std::size_t cols, double lambda) {
    const __m256d vl = _mm256_set1_pd(lambda);
    const __m256d two = _mm256_set1_pd(2.0);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* pi = p + i * cols;
        const double* up = i > 0 ? p + (i - 1) * cols : nullptr;
        const double* dn = i + 1 < rows ? p + (i + 1) * cols : nullptr;
        double* gi = g + i * cols;
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            const __m256d vp = _mm256_loadu_pd(pi + j);
            __m256d acc = _mm256_setzero_pd();
            if (dn)
                acc = _mm256_add_pd(
                    acc, _mm256_mul_pd(two, _mm256_sub_pd(vp, _mm256_loadu_pd(dn + j))));
            if (up)
                acc = _mm256_add_pd(
                    acc, _mm256_mul_pd(two, _mm256_sub_pd(vp, _mm256_loadu_pd(up + j))));
            _mm256_storeu_pd(gi + j,
                             _mm256_fmadd_pd(vl, acc, _mm256_loadu_pd(gi + j)));
        }
        for (; j < cols; ++j) {
            double acc = 0.0;
            if (dn) acc += 2.0 * (pi[j] - dn[j]);
            if (up) acc += 2.0 * (pi[j] - up[j]);
            gi[j] += lambda * acc;
        }
    }
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t = {
        exp_array_avx2,       softmax_rows_avx2,    matmul_avx2,
        matmul_at_b_avx2,     sub_avx2,             sum_sq_diff_avx2,
        adam_update_avx2,     softmax_backward_avx2, smoothness_penalty_avx2,
        smoothness_grad_acc_avx2,
    };
    return t;
}

}  // namespace qdt::kernels::detail
