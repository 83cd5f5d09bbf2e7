// Semiclassical mean-field dynamics of the ensemble and its reductions.
//
// Full model: per-spin coherence s_m = <sigma_m^+> and inversion z_m with
//   c1_m = (1/N) sum_{j != m} s_j,   c2_m = (1/2N) sum_{j != m} (1 + z_j).
// Symmetric model: s = A e^{i phi} for every spin.
// Two-group model: s = A e^{i(pi/4 +- zeta)} on the +-delta halves.
// Rates and times in units of Gamma2 unless the params say otherwise.
#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "spincat/core.hpp"
#include "spincat/ode.hpp"
#include "spincat/parallel.hpp"

namespace spincat {

struct MeanFieldState {
    std::vector<std::complex<double>> coherences;  // <sigma_m^+>
    std::vector<double> inversions;                 // <sigma_m^z>

    std::size_t size() const { return inversions.size(); }
    /// max_m 4|s_m|^2 + z_m^2
    double max_bloch_norm() const;
};

/// Packed layout used by the integrator: [Re s (N), Im s (N), z (N)].
Eigen::VectorXd pack(const MeanFieldState& s);
MeanFieldState unpack(const Eigen::VectorXd& y);

/// (A, phase, z); phase is phi for the symmetric model and zeta for the
/// two-group model.
struct ReducedState {
    double amplitude = 0.0;
    double phase = 0.0;
    double inversion = -1.0;

    Eigen::Vector3d vec() const { return {amplitude, phase, inversion}; }
    static ReducedState from(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
};

/// O(N) right-hand side of the full mean-field equations (global sums minus the
/// self term). The per-spin loop runs in parallel when requested; the global
/// sums are always accumulated serially so both paths agree bit for bit.
void mf_rhs_full(const Eigen::VectorXd& y, const EnsembleParams& params,
                 const std::vector<double>& detunings, Eigen::VectorXd& dy,
                 Execution exec = Execution::serial);
MeanFieldState mf_rhs_full(const MeanFieldState& state, const EnsembleParams& params,
                           const std::vector<double>& detunings);

/// O(N^2) version with explicit double sums.
MeanFieldState mf_rhs_full_reference(const MeanFieldState& state, const EnsembleParams& params,
                                     const std::vector<double>& detunings);

/// Large-N symmetric equations (phase phi), evaluated as A-dot, phi-dot, z-dot:
///   A'  = A (-2 eta z sin 2phi - 2 G A^2 + N G z A^2)
///   phi' = -2 eta z A cos 2phi
///   z'  = A^2 (8 eta sin 2phi - 4 G (1 + z) - 4 G N A^2)
Eigen::Vector3d mf_rhs_symmetric(const Eigen::Vector3d& s, const EnsembleParams& params);

/// Closed-form synchronized state A^2 = (4 eta - 1 + r)/(2N), z = -(1 + r)/2,
/// phi = pi/4, r = sqrt(1 - 16 eta/N), with eta in units of Gamma2. Throws
/// ConfigError for eta/N > 1/16, where the synchronized state does not exist.
ReducedState symmetric_steady_state(int n, double eta);

/// Exact fixed point of mf_rhs_symmetric at phi = pi/4:
///   N z^2 + (N - 2) z + 4 eta - 2 = 0 (upper root),  N A^2 = 2 eta - 1 - z.
/// Throws ConfigError when no real synchronized root exists.
ReducedState symmetric_fixed_point(int n, double eta);

/// Two-group reduction obtained by inserting the group-symmetric ansatz into
/// the full equations without dropping any term. Requires phase_phi = 0.
///   r = (N-1)/N, c = cos zeta, c2 = r (1+z)/2
///   |c1|^2 = A^2 (c^2 (1 - 2/N) + 1/N^2),  K = c2/N + |c1|^2
///   B = r (1+z) + A^2 (N-2) c^2 + A^2/N
///   A'    = A [-2 eta z (c^2 - cos 2zeta/N) - 2 G K + G z (c^2 - 1/N) B]
///   zeta' = delta + eta z (1 - 2/N) sin 2zeta - G z B sin 2zeta / 2
///   z'    = 8 eta A^2 (c^2 - cos 2zeta/N) - 4 G (1+z) K - 4 G A^2 (c^2 - 1/N) B
Eigen::Vector3d mf_rhs_two_ensemble(const Eigen::Vector3d& s, const EnsembleParams& params,
                                    double delta);

/// The three-equation two-group model in its printed form (drops the
/// -2 G K term of A' and simplifies the bracket). Kept for comparison only.
Eigen::Vector3d mf_rhs_two_ensemble_printed(const Eigen::Vector3d& s, const EnsembleParams& params,
                                            double delta);

/// Linear-response steady state for small delta:
///   zeta = (1 + r) N^2 delta / (32 eta^2), A^2 and z as symmetric_steady_state.
ReducedState two_ensemble_steady_state_small_delta(int n, double eta, double delta);

enum class ReducedModel { symmetric, two_ensemble, two_ensemble_printed };

/// Integrates a reduced model and returns the state at every time.
std::vector<ReducedState> integrate_reduced(ReducedModel model, const EnsembleParams& params,
                                            double delta, const ReducedState& start,
                                            const std::vector<double>& times,
                                            const OdeOptions& opts);

/// Integrates the full model; observe(i, t, y) gets the packed state.
using FullObserver = std::function<bool(std::size_t, double, const Eigen::VectorXd&)>;
void integrate_full(const EnsembleParams& params, const std::vector<double>& detunings,
                    const MeanFieldState& start, const std::vector<double>& times,
                    const OdeOptions& opts, Execution exec, const FullObserver& observe);

/// Every spin in group g (first half +, second half -) set to A e^{i(pi/4 +- zeta)}, z.
MeanFieldState two_group_state(int n, const ReducedState& s);
/// Every spin set to A e^{i phi}, z.
MeanFieldState symmetric_state(int n, const ReducedState& s);

/// (A, zeta, z) read back from spin 0 of a two-group state.
ReducedState two_group_projection(const MeanFieldState& s);

} // namespace spincat
