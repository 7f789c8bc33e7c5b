#include "qdt/detector.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qdt/errors.hpp"
#include "qdt/kernels.hpp"

namespace qdt {

void DiagonalPovm::validate(double row_sum_tol) const {
    for (std::size_t i = 0; i < pi.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < pi.cols(); ++j) {
            const double x = pi(i, j);
            if (!(x >= 0.0))
                throw numeric_error("DiagonalPovm: negative or non-finite entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > row_sum_tol)
            throw numeric_error("DiagonalPovm: row sum deviates from 1");
    }
}

DiagonalPovm ideal_pnr_povm(std::size_t hilbert_dim, std::size_t num_outcomes) {
    if (num_outcomes < 2 || num_outcomes > hilbert_dim)
        throw config_error("ideal_pnr_povm: need 2 <= outcomes <= hilbert_dim");
    DiagonalPovm povm{Mat(hilbert_dim, num_outcomes)};
    for (std::size_t i = 0; i < hilbert_dim; ++i) {
        if (i < num_outcomes - 1)
            povm.pi(i, i) = 1.0;         // Fock projector |i><i|
        else
            povm.pi(i, num_outcomes - 1) = 1.0;  // overflow bucket ">= N-1"
    }
    return povm;
}

DiagonalPovm efficient_pnr_povm(std::size_t hilbert_dim, std::size_t num_outcomes,
                                double eta) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::domain_error("efficient_pnr_povm: eta must be in [0, 1]");
    if (eta == 1.0) return ideal_pnr_povm(hilbert_dim, num_outcomes);
    if (num_outcomes < 2 || num_outcomes > hilbert_dim)
        throw config_error("efficient_pnr_povm: need 2 <= outcomes <= hilbert_dim");

    DiagonalPovm povm{Mat(hilbert_dim, num_outcomes)};
    for (std::size_t k = 0; k < hilbert_dim; ++k) {
        // Binomial(k, eta) by recurrence; exact at eta = 0 (point mass at n = 0).
        double b = std::pow(1.0 - eta, static_cast<double>(k));
        double partial = 0.0;
        for (std::size_t n = 0; n + 1 < num_outcomes; ++n) {
            const double value = n <= k ? b : 0.0;
            povm.pi(k, n) = value;
            partial += value;
            if (n < k)
                b *= (static_cast<double>(k - n) * eta) /
                     (static_cast<double>(n + 1) * (1.0 - eta));
        }
        // Completeness remainder, clamped against rounding.
        povm.pi(k, num_outcomes - 1) = std::max(0.0, 1.0 - partial);
    }
    return povm;
}

Dataset simulate_dataset(const DiagonalPovm& povm, const ProbeSet& probes, double sigma,
                         std::uint64_t seed, std::optional<std::uint64_t> shots) {
    if (povm.hilbert_dim() != probes.hilbert_dim)
        throw config_error("simulate_dataset: POVM and probe Hilbert dimensions differ");
    if (!(sigma >= 0.0))
        throw std::domain_error("simulate_dataset: sigma must be >= 0");
    if (shots && *shots == 0)
        throw config_error("simulate_dataset: shots must be positive when given");

    const std::size_t d = probes.num_probes();
    const std::size_t n = povm.num_outcomes();
    std::mt19937_64 rng(seed);

    // Perturbed probe matrix; the clean F stays with the ProbeSet.
    const Mat* f = &probes.probe_matrix;
    Mat f_noisy;
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        std::vector<double> perturbed(d);
        for (std::size_t i = 0; i < d; ++i)
            perturbed[i] = std::max(0.0, probes.mean_photon_numbers[i] + noise(rng));
        f_noisy = probe_matrix_from(perturbed, probes.hilbert_dim);
        f = &f_noisy;
    }

    Dataset ds;
    ds.noise_sigma = sigma;
    ds.shots = shots;
    {
        std::ostringstream ref;
        ref << "grid:D=" << d << ",M=" << probes.hilbert_dim
            << ",tail=" << probes.tail_bound;
        ds.probe_set_ref = ref.str();
    }
    ds.probs = Mat(d, n);
    kernels::matmul(f->data(), povm.pi.data(), ds.probs.data(), d, probes.hilbert_dim, n);

    if (shots) {
        // Finite-shot frequencies: rows become multinomial counts / shots.
        const std::uint64_t s = *shots;
        for (std::size_t i = 0; i < d; ++i) {
            std::discrete_distribution<std::size_t> outcome(ds.probs.row(i),
                                                            ds.probs.row(i) + n);
            std::vector<std::uint64_t> counts(n, 0);
            for (std::uint64_t t = 0; t < s; ++t) ++counts[outcome(rng)];
            for (std::size_t j = 0; j < n; ++j)
                ds.probs(i, j) =
                    static_cast<double>(counts[j]) / static_cast<double>(s);
        }
    }
    return ds;
}

}  // namespace qdt
