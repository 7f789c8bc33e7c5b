#include "qdt/fock.hpp"

#include <cmath>
#include <stdexcept>

#include "qdt/errors.hpp"

namespace qdt {
namespace {

// log pmf; mu > 0 required
inline double log_poisson_pmf(double mu, std::uint64_t j) {
    return static_cast<double>(j) * std::log(mu) - mu -
           std::lgamma(static_cast<double>(j) + 1.0);
}

inline void check_mu(double mu) {
    if (!(mu >= 0.0)) throw std::domain_error("poisson: mean photon number must be >= 0");
}

}  // namespace

double poisson_pmf(double mu, std::uint64_t j) {
    check_mu(mu);
    if (mu == 0.0) return j == 0 ? 1.0 : 0.0;
    return std::exp(log_poisson_pmf(mu, j));
}

double poisson_cdf(double mu, std::uint64_t j) {
    check_mu(mu);
    if (mu == 0.0) return 1.0;
    // Terms more than ~60 sigma left of the mean are exactly 0 in double.
    std::uint64_t k0 = 0;
    if (mu > 4000.0) {
        const double lo = mu - 60.0 * std::sqrt(mu) - 20.0;
        if (lo > 0.0) k0 = static_cast<std::uint64_t>(lo);
    }
    double sum = 0.0, comp = 0.0;
    for (std::uint64_t k = k0; k <= j; ++k) {
        const double term = std::exp(log_poisson_pmf(mu, k));
        // Kahan compensated accumulation
        const double y = term - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        // Right tail beyond this point is bounded by the current term.
        if (static_cast<double>(k) > 2.0 * mu + 10.0 && term < 1e-20) break;
    }
    return sum < 1.0 ? sum : 1.0;
}

double max_mean_photon(std::size_t hilbert_dim, double tail_bound) {
    if (hilbert_dim < 2) throw config_error("max_mean_photon: hilbert_dim must be >= 2");
    if (!(tail_bound > 0.0 && tail_bound < 1.0))
        throw config_error("max_mean_photon: tail_bound must be in (0, 1)");

    const std::uint64_t j = hilbert_dim - 1;
    const auto survival = [j](double mu) { return 1.0 - poisson_cdf(mu, j); };

    double lo = 0.0;
    double hi = static_cast<double>(hilbert_dim);
    if (survival(lo) > tail_bound)
        throw numeric_error("max_mean_photon: no feasible mean photon number");
    if (survival(hi) <= tail_bound) return hi - 1e-9;  // entire [0, M) feasible

    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (survival(mid) <= tail_bound)
            lo = mid;
        else
            hi = mid;
    }
    return lo;  // survival(lo) <= tail_bound holds by bisection invariant
}

Mat probe_matrix_from(const std::vector<double>& mean_photon_numbers,
                      std::size_t hilbert_dim) {
    Mat f(mean_photon_numbers.size(), hilbert_dim);
    for (std::size_t i = 0; i < mean_photon_numbers.size(); ++i) {
        const double mu = mean_photon_numbers[i];
        check_mu(mu);
        double* row = f.row(i);
        if (mu == 0.0) {
            row[0] = 1.0;
            continue;
        }
        for (std::size_t k = 0; k < hilbert_dim; ++k)
            row[k] = std::exp(log_poisson_pmf(mu, k));
    }
    return f;
}

ProbeSet build_probe_grid(std::size_t num_probes, std::size_t hilbert_dim,
                          double tail_bound) {
    if (num_probes < 2) throw config_error("build_probe_grid: need at least 2 probes");
    const double mu_max = max_mean_photon(hilbert_dim, tail_bound);

    ProbeSet probes;
    probes.hilbert_dim = hilbert_dim;
    probes.tail_bound = tail_bound;
    probes.mean_photon_numbers.resize(num_probes);
    for (std::size_t k = 0; k < num_probes; ++k)
        probes.mean_photon_numbers[k] =
            static_cast<double>(k) * mu_max / static_cast<double>(num_probes - 1);
    probes.probe_matrix = probe_matrix_from(probes.mean_photon_numbers, hilbert_dim);
    return probes;
}

std::vector<std::complex<double>> coherent_amplitude_vector(double mu, double phase,
                                                            std::size_t hilbert_dim) {
    check_mu(mu);
    std::vector<std::complex<double>> a(hilbert_dim, {0.0, 0.0});
    if (mu == 0.0) {
        a[0] = 1.0;
        return a;
    }
    const double log_mu = std::log(mu);
    for (std::size_t k = 0; k < hilbert_dim; ++k) {
        const double kd = static_cast<double>(k);
        const double log_mag =
            -0.5 * mu + 0.5 * (kd * log_mu - std::lgamma(kd + 1.0));
        a[k] = std::polar(std::exp(log_mag), kd * phase);
    }
    return a;
}

}  // namespace qdt
