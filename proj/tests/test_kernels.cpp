#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "qdt/kernels.hpp"
#include "test_util.hpp"

using namespace qdt;
namespace k = qdt::kernels;

namespace {

// Restores auto-detection when a test forces a backend.
struct BackendGuard {
    ~BackendGuard() { k::reset_backend(); }
};

std::vector<k::Backend> available_backends() {
    std::vector<k::Backend> out{k::Backend::scalar};
    if (k::backend_available(k::Backend::avx2)) out.push_back(k::Backend::avx2);
    return out;
}

}  // namespace

TEST_CASE("exp_array matches std::exp across the double range") {
    BackendGuard guard;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-740.0, 700.0);
    std::vector<double> x(4097);
    for (auto& v : x) v = dist(rng);
    x[0] = 0.0;
    x[1] = -746.5;   // underflows to 0
    x[2] = -1000.0;
    x[3] = 709.0;
    x[4] = 710.0;    // saturates to +inf
    x[5] = 1e-300;
    x[6] = -0.0;

    for (const auto backend : available_backends()) {
        k::force_backend(backend);
        std::vector<double> y(x.size());
        k::exp_array(x.data(), y.data(), x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double want = std::exp(x[i]);
            if (std::isinf(want)) {
                CHECK(std::isinf(y[i]));
            } else if (want < 1e-300) {
                CHECK(std::abs(y[i] - want) <= 1e-305);
            } else {
                CHECK(test::rel_err(y[i], want) <= 1e-14);
            }
        }
    }
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
    BackendGuard guard;
    std::mt19937_64 rng(11);

    // Shapes chosen to exercise vector bodies and scalar tails.
    const std::vector<std::array<std::size_t, 3>> shapes = {
        {1, 1, 1}, {2, 3, 5}, {7, 4, 9}, {8, 8, 8}, {5, 13, 6}, {16, 31, 25}, {3, 64, 4}};

    for (const auto& s : shapes) {
        const auto [n, kk, m] = std::array<std::size_t, 3>{s[0], s[1], s[2]};
        const Mat a = test::random_mat(n, kk, rng);
        const Mat b = test::random_mat(kk, m, rng);
        const Mat at = test::random_mat(kk, n, rng);
        const Mat theta = test::random_mat(n, m, rng, -30.0, 30.0);
        const Mat p = test::random_mat(n, m, rng, 0.0, 1.0);
        const Mat gp = test::random_mat(n, m, rng);
        const Mat u = test::random_mat(1, n * m, rng);
        const Mat w = test::random_mat(1, n * m, rng);

        struct Outputs {
            Mat mm, mab, soft, back, diff, smooth_grad;
            double ssd = 0, pen = 0;
            Mat theta2, mom, vel;
        };
        std::vector<Outputs> results;

        for (const auto backend : available_backends()) {
            k::force_backend(backend);
            Outputs o;
            o.mm = Mat(n, m);
            k::matmul(a.data(), b.data(), o.mm.data(), n, kk, m);
            o.mab = Mat(n, m);
            k::matmul_at_b(at.data(), b.data(), o.mab.data(), kk, n, m);
            o.soft = Mat(n, m);
            k::softmax_rows(theta.data(), o.soft.data(), n, m);
            o.back = Mat(n, m);
            k::softmax_backward(p.data(), gp.data(), o.back.data(), n, m);
            o.diff = Mat(1, n * m);
            k::sub(u.data(), w.data(), o.diff.data(), n * m);
            o.ssd = k::sum_sq_diff(u.data(), w.data(), n * m);
            o.pen = k::smoothness_penalty(p.data(), n, m);
            o.smooth_grad = gp;
            k::smoothness_grad_acc(p.data(), o.smooth_grad.data(), n, m, 1e-3);
            o.theta2 = theta;
            o.mom = Mat(n, m);
            o.vel = Mat(n, m);
            k::adam_update(o.theta2.data(), o.mom.data(), o.vel.data(), gp.data(), n * m,
                           0.9, 0.9, 0.1, 0.19, 1e-2, 1e-8);
            results.push_back(std::move(o));
        }

        for (std::size_t i = 1; i < results.size(); ++i) {
            CHECK(test::max_abs_diff(results[0].mm, results[i].mm) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].mab, results[i].mab) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].soft, results[i].soft) <= 1e-13);
            CHECK(test::max_abs_diff(results[0].back, results[i].back) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].diff, results[i].diff) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].smooth_grad, results[i].smooth_grad) <=
                  1e-12);
            CHECK(test::rel_err(results[i].ssd, results[0].ssd) <= 1e-12);
            CHECK(std::abs(results[i].pen - results[0].pen) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].theta2, results[i].theta2) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].mom, results[i].mom) <= 1e-12);
            CHECK(test::max_abs_diff(results[0].vel, results[i].vel) <= 1e-12);
        }
    }
}

TEST_CASE("matmul kernels match a brute-force triple loop") {
    BackendGuard guard;
    std::mt19937_64 rng(13);
    const std::size_t n = 6, kk = 9, m = 7;
    const Mat a = test::random_mat(n, kk, rng);
    const Mat b = test::random_mat(kk, m, rng);

    Mat want(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < kk; ++q) s += a(i, q) * b(q, j);
            want(i, j) = s;
        }

    for (const auto backend : available_backends()) {
        k::force_backend(backend);
        Mat got(n, m);
        k::matmul(a.data(), b.data(), got.data(), n, kk, m);
        CHECK(test::max_abs_diff(got, want) <= 1e-13);

        // A^T B through the transpose layout must match A stored transposed.
        Mat at(kk, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < kk; ++q) at(q, i) = a(i, q);
        Mat got2(n, m);
        k::matmul_at_b(at.data(), b.data(), got2.data(), kk, n, m);
        CHECK(test::max_abs_diff(got2, want) <= 1e-13);
    }
}

TEST_CASE("forcing an unavailable backend is rejected") {
    BackendGuard guard;
    if (!k::backend_available(k::Backend::avx2))
        CHECK_THROWS_AS(k::force_backend(k::Backend::avx2), config_error);
    CHECK_NOTHROW(k::force_backend(k::Backend::scalar));
    CHECK(k::active_backend() == k::Backend::scalar);
    k::reset_backend();
    CHECK(k::backend_from_name("scalar") == k::Backend::scalar);
    CHECK_THROWS_AS(k::backend_from_name("neon"), config_error);
}
