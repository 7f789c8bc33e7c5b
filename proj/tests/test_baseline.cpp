#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "qdt/baseline.hpp"
#include "qdt/errors.hpp"
#include "qdt/metrics.hpp"
#include "test_util.hpp"

using namespace qdt;

namespace {

// Independent QP oracle for length-3 inputs: enumerate every candidate
// active set, solve the equality-constrained problem on it, keep the
// feasible candidate closest to v.
std::vector<double> simplex_qp_oracle3(const std::array<double, 3>& v) {
    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < 8; ++mask) {
        std::vector<int> support;
        for (int i = 0; i < 3; ++i)
            if (mask & (1 << i)) support.push_back(i);
        double sum = 0.0;
        for (int i : support) sum += v[i];
        const double shift = (sum - 1.0) / static_cast<double>(support.size());
        std::vector<double> candidate(3, 0.0);
        bool feasible = true;
        for (int i : support) {
            candidate[i] = v[i] - shift;
            if (candidate[i] < -1e-12) feasible = false;
        }
        if (!feasible) continue;
        double dist = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double d = candidate[i] - v[i];
            dist += d * d;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = candidate;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("project_to_simplex hand cases") {
    {
        const std::vector<double> v = {0.5, 0.5};
        const auto p = project_to_simplex(v);
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
    }
    {
        const std::vector<double> v = {1.0, 1.0};
        const auto p = project_to_simplex(v);
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));
    }
    {
        const std::vector<double> v = {2.0, 0.0};
        const auto p = project_to_simplex(v);
        CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(p[1] == 0.0);

        // Cross-check against a dense 1-d scan of the N = 2 simplex.
        double best_t = -1.0, best_dist = 1e300;
        for (double t = 0.0; t <= 1.0; t += 1e-6) {
            const double dist = (t - 2.0) * (t - 2.0) + (1.0 - t) * (1.0 - t);
            if (dist < best_dist) {
                best_dist = dist;
                best_t = t;
            }
        }
        CHECK(std::abs(p[0] - best_t) <= 2e-6);
    }
    const std::vector<double> bad = {std::nan(""), 0.0};
    CHECK_THROWS_AS(project_to_simplex(bad), numeric_error);
}

TEST_CASE("project_to_simplex matches the QP oracle and is idempotent") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::array<double, 3> v = {dist(rng), dist(rng), dist(rng)};
        const auto got = project_to_simplex(std::vector<double>(v.begin(), v.end()));
        const auto want = simplex_qp_oracle3(v);
        REQUIRE(want.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-8);

        double sum = 0.0;
        for (double x : got) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        const auto twice = project_to_simplex(got);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(twice[i] - got[i]) <= 1e-12);
    }
}

TEST_CASE("fit_baseline zero iterations returns the uniform POVM") {
    const ProbeSet probes = build_probe_grid(30, 10, 1e-5);
    const DiagonalPovm truth = ideal_pnr_povm(10, 4);
    const Dataset ds = simulate_dataset(truth, probes, 0.0, 1);
    BaselineConfig cfg;
    cfg.iterations = 0;
    const FitResult result = fit_baseline(ds, probes, cfg);
    for (std::size_t i = 0; i < result.pi_hat.pi.size(); ++i)
        CHECK(result.pi_hat.pi.data()[i] == 0.25);
    CHECK(result.loss_history.size() == 1);
    CHECK(result.solver == "baseline");
}

TEST_CASE("fit_baseline iterates stay feasible and loss decreases monotonically") {
    const ProbeSet probes = build_probe_grid(100, 20, 1e-5);
    const DiagonalPovm truth = ideal_pnr_povm(20, 5);
    const Dataset ds = simulate_dataset(truth, probes, 0.0, 1);

    BaselineConfig cfg;
    cfg.step_size = 1e-4;
    cfg.iterations = 300;
    const FitResult result = fit_baseline(ds, probes, cfg);
    result.pi_hat.validate(1e-12);
    for (std::size_t t = 1; t < result.loss_history.size(); ++t)
        CHECK(result.loss_history[t] <= result.loss_history[t - 1] + 1e-14);
    CHECK(result.wall_clock_per_iteration.size() == cfg.iterations);
}

TEST_CASE("fit_baseline reconstructs an ideal detector at desk scale") {
    const ProbeSet probes = build_probe_grid(600, 60, 1e-5);
    const DiagonalPovm truth = ideal_pnr_povm(60, 10);
    const Dataset ds = simulate_dataset(truth, probes, 0.0, 1);
    const FitResult result = fit_baseline(ds, probes, BaselineConfig{});
    const FidelityReport report = average_fidelity(result.pi_hat, truth);
    CHECK(report.average >= 0.95);
    // Deterministic: rerunning reproduces the result bit for bit.
    const FitResult again = fit_baseline(ds, probes, BaselineConfig{});
    CHECK(result.pi_hat.pi == again.pi_hat.pi);
}

TEST_CASE("fit_baseline validates configuration") {
    const ProbeSet probes = build_probe_grid(20, 8, 1e-5);
    const DiagonalPovm povm = ideal_pnr_povm(8, 3);
    const Dataset ds = simulate_dataset(povm, probes, 0.0, 1);
    BaselineConfig bad;
    bad.step_size = 0.0;
    CHECK_THROWS_AS(fit_baseline(ds, probes, bad), config_error);
}
