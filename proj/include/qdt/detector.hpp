#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "qdt/fock.hpp"
#include "qdt/mat.hpp"

namespace qdt {

// Phase-insensitive POVM: M x N matrix Pi whose column j holds the diagonal
// of POVM element E_j in the Fock basis. Rows are probability vectors.
struct DiagonalPovm {
    Mat pi;  // M x N

    std::size_t hilbert_dim() const { return pi.rows(); }
    std::size_t num_outcomes() const { return pi.cols(); }

    // Throws numeric_error if entries are negative or a row sum strays from 1.
    void validate(double row_sum_tol = 1e-9) const;
};

// Ideal PNR detector resolving counts 0..N-2 plus an overflow outcome ">= N-1".
DiagonalPovm ideal_pnr_povm(std::size_t hilbert_dim, std::size_t num_outcomes);

// PNR detector with quantum efficiency eta: binomially smeared count outcomes,
// final column the completeness remainder (clamped at 0 against rounding).
// eta = 1 reproduces ideal_pnr_povm exactly.
DiagonalPovm efficient_pnr_povm(std::size_t hilbert_dim, std::size_t num_outcomes,
                                double eta);

// Simulated outcome statistics for a probe grid.
struct Dataset {
    Mat probs;                          // D x N
    std::string probe_set_ref;
    double noise_sigma = 0.0;
    std::optional<std::uint64_t> shots; // finite-shot frequencies when set
};

// P = F~ * Pi where F~ is built from mean photon numbers perturbed by
// N(0, sigma^2) amplitude noise (clamped at 0). Reconstruction later uses the
// clean F; the mismatch is the error model. With shots = S each row is
// replaced by multinomial frequencies over S draws.
Dataset simulate_dataset(const DiagonalPovm& povm, const ProbeSet& probes,
                         double sigma, std::uint64_t seed,
                         std::optional<std::uint64_t> shots = std::nullopt);

}  // namespace qdt
