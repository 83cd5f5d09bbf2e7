// Closed-form and exact per-realization fidelities of spin coherent and spin
// cat states under free inhomogeneous dephasing, H0 = 1/2 sum_n delta_n sz_n.
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "spincat/core.hpp"
#include "spincat/parallel.hpp"

namespace spincat {

enum class CatParity { even, odd };

enum class FreeState { css, cat_even, cat_odd };

struct FidelityTrace {
    std::vector<double> times;
    std::vector<double> values;
};

/// exp(-sigma^2 t^2 / 2), with the exact limit 0 for t = +inf and sigma > 0.
double gaussian_coherence(double sigma, double t);

/// <theta,phi| e^{-i H0 t} |theta,phi> for the given detunings. O(N).
std::complex<double> overlap_free(const SpinCoherentParams& css, const std::vector<double>& detunings,
                                  double t);

/// |overlap_free|^2 written as a product of real factors.
double fidelity_css_exact(double theta, const std::vector<double>& detunings, double t);

/// Gaussian-disorder average of fidelity_css_exact.
double mean_fidelity_css(double theta, double delta_sigma, int n, double t);

/// Small-amplitude variance (N theta^4 / 8)(1 - exp(-delta^2 t^2)).
double var_fidelity_css(double theta, double delta_sigma, int n, double t);

/// Exact variance of fidelity_css_exact over Gaussian disorder,
/// prod E[X_n^2] - (prod E[X_n])^2.
double var_fidelity_css_exact(double theta, double delta_sigma, int n, double t);

/// sqrt(2 (1 +- cos^N theta)).
double cat_norm(double theta, int n, CatParity parity);

/// |<Cat| e^{-i H0 t} |Cat>|^2 from the four branch overlaps. O(N).
double overlap_cat_exact(const SpinCoherentParams& css, CatParity parity,
                         const std::vector<double>& detunings, double t);

/// Gaussian-disorder average of overlap_cat_exact.
double mean_fidelity_cat(double theta, double delta_sigma, int n, CatParity parity, double t);

struct MonteCarloResult {
    std::vector<FidelityTrace> realizations; // first `kept` realizations only
    FidelityTrace mean;
    std::vector<double> std_error;           // of the mean
    std::vector<double> variance;            // sample variance across realizations
    std::vector<double> variance_std_error;  // standard error of the sample variance
};

/// Exact fidelity traces for realization_count independent detuning draws.
/// Realization r uses sample_detunings(model, n, derive_seed(master_seed, r)).
/// Reductions run in realization order, so the result does not depend on the
/// worker count.
MonteCarloResult monte_carlo_free_dephasing(FreeState state, const SpinCoherentParams& css,
                                            const DetuningModel& model, int n, const TimeGrid& grid,
                                            const SeedSpec& seeds, std::size_t kept = 10,
                                            Execution exec = Execution::parallel);

} // namespace spincat
