#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qdt/mat.hpp"

namespace qdt {

// Coherent-state probe grid: D mean photon numbers mu_i = |alpha_i|^2 and
// the D x M matrix F of truncated Poisson photon-number probabilities.
struct ProbeSet {
    std::vector<double> mean_photon_numbers;  // length D, each in [0, M)
    std::size_t hilbert_dim = 0;              // M
    Mat probe_matrix;                         // D x M
    double tail_bound = 1e-5;                 // truncation bound the grid was built for

    std::size_t num_probes() const { return mean_photon_numbers.size(); }
};

// Poisson pmf mu^j e^{-mu} / j!, evaluated in log space so it stays finite
// for j up to 1e6 and mu up to 1e6.
double poisson_pmf(double mu, std::uint64_t j);

// Poisson cdf Phi(j; mu) = sum_{k=0..j} pmf(mu, k).
double poisson_cdf(double mu, std::uint64_t j);

// Largest mu < M with survival 1 - Phi(M-1; mu) <= tail_bound, by bisection
// to absolute tolerance 1e-9. The returned value satisfies the bound exactly
// when re-evaluated.
double max_mean_photon(std::size_t hilbert_dim, double tail_bound = 1e-5);

// D evenly spaced mean photon numbers on [0, max_mean_photon], endpoints
// included, with the probe matrix filled from poisson_pmf.
ProbeSet build_probe_grid(std::size_t num_probes, std::size_t hilbert_dim,
                          double tail_bound = 1e-5);

// D x M Poisson probe matrix for arbitrary mean photon numbers.
Mat probe_matrix_from(const std::vector<double>& mean_photon_numbers,
                      std::size_t hilbert_dim);

// Truncated coherent state |alpha> with |alpha|^2 = mu and arg(alpha) = phase:
// entry k = e^{-mu/2} (sqrt(mu) e^{i phase})^k / sqrt(k!). Not renormalized;
// the squared norm equals Phi(M-1; mu) and the truncation defect is kept
// visible rather than hidden.
std::vector<std::complex<double>> coherent_amplitude_vector(double mu, double phase,
                                                            std::size_t hilbert_dim);

}  // namespace qdt
