// Master-equation dynamics of the driven-dissipative spin ensemble
//   drho/dt = -i[H, rho] + (Gamma2 / N^2) D[J] rho,  J = (sum_i sm_i)^2,
//   H = 1/2 sum_i delta_i sz_i + (eta / N)(e^{i phi} J + h.c.)
// in the full 2^N product basis or the (N+1)-dimensional symmetric sector.
//
// Full basis: bit i of the index is set when spin i is excited.
// Collective basis: index k is the number of excitations (Holstein-Primakoff
// boson number), S- |k> = sqrt(k (N - k + 1)) |k-1>.
#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "spincat/analytic.hpp"
#include "spincat/core.hpp"
#include "spincat/ode.hpp"
#include "spincat/parallel.hpp"

namespace spincat {

using cplx = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

enum class BasisKind { full, collective, bosonic };

struct Basis {
    BasisKind kind = BasisKind::collective;
    int n = 1;          // number of spins (bosonic: truncation dimension - 1)
    std::size_t dim() const;
    bool operator==(const Basis& o) const { return kind == o.kind && n == o.n; }
};

std::string to_string(const Basis& b);

constexpr int kFullBasisCap = 12;

struct DensityMatrix {
    Basis basis;
    Eigen::MatrixXcd rho;
};

struct PureState {
    Basis basis;
    Eigen::VectorXcd psi;
};

// ---------------------------------------------------------------- operators

/// Collective lowering operator S- on the full or collective basis.
SparseOp collective_lowering(const Basis& b);

/// Truncated annihilation operator with a|k> = sqrt(k)|k-1> (collective basis).
SparseOp truncated_annihilation(int dim);

/// Isometry from the collective basis into the symmetric sector of the full
/// basis: column k is the normalized Dicke state with k excitations.
Eigen::MatrixXcd symmetric_embedding(int n);

// ---------------------------------------------------------------- generator

class Generator {
public:
    /// Full product basis with per-spin detunings. N above kFullBasisCap is
    /// rejected with a memory estimate.
    static Generator full(const EnsembleParams& params, const std::vector<double>& detunings);
    /// Symmetric sector; detunings must all be zero.
    static Generator collective(const EnsembleParams& params,
                                const std::vector<double>& detunings = {});
    /// Bosonic limit -i[eta(e^{i phi} a^2 + h.c.), rho] + Gamma2 D[a^2] rho,
    /// truncated to `dim` Fock states.
    static Generator bosonic(const EnsembleParams& params, int dim);

    const Basis& basis() const { return basis_; }

    /// drho = L rho for Hermitian rho (only one triangle of the result is
    /// computed). Parallel and serial execution give bit-identical results.
    /// Collective and bosonic bases use a fused elementwise kernel, the full
    /// basis sparse-times-dense products.
    void apply(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& drho,
               Execution exec = Execution::serial) const;

    /// Straightforward dense evaluation of the Lindblad form, kept as a
    /// reference for the sparse kernel.
    Eigen::MatrixXcd apply_reference(const Eigen::MatrixXcd& rho) const;

    const SparseOp& hamiltonian() const { return h_; }
    const SparseOp& jump() const { return j_; }
    double jump_rate() const { return rate_; }

private:
    // H = diag(detuning) + drive J + conj(drive) J^dag
    Generator(Basis b, Eigen::VectorXd detuning, SparseOp j, cplx drive, double rate);

    Basis basis_;
    Eigen::VectorXd diag_;
    SparseOp j_;
    SparseOp jd_;
    cplx drive_;
    double rate_ = 0.0;
    SparseOp h_;
    std::vector<cplx> band_;  // J[k-2, k] for the collective/bosonic fast path
};

/// out = A * B with A sparse row-major; parallelized over columns of B.
void sparse_times_dense(const SparseOp& a, const Eigen::MatrixXcd& b, Eigen::MatrixXcd& out,
                        Execution exec);

// ---------------------------------------------------------------- states

struct StateSpec {
    enum class Kind { css, cat_even, cat_odd, coherent } kind = Kind::css;
    SpinCoherentParams css;  // css / cat
    cplx alpha{0.0, 0.0};    // bosonic coherent amplitude
};

/// Pure state in the requested basis. `warning` is set when a bosonic
/// coherent state is truncated badly (|alpha|^2 > N/2).
PureState prepare_pure(const StateSpec& spec, const Basis& basis, std::string* warning = nullptr);
DensityMatrix prepare_state(const StateSpec& spec, const Basis& basis,
                            std::string* warning = nullptr);
DensityMatrix to_density(const PureState& psi);

// ---------------------------------------------------------------- observables

/// <psi|rho|psi>.
double fidelity_to(const DensityMatrix& rho, const PureState& psi);
/// Excitation-number parity <(-1)^k>.
double parity_expectation(const DensityMatrix& rho);
/// <a> with a the Holstein-Primakoff annihilator; in the full basis the
/// operator is V a V^dag with V = symmetric_embedding(N).
cplx amplitude_expectation(const DensityMatrix& rho);
cplx trace(const DensityMatrix& rho);
/// max |rho - rho^dag|
double hermiticity_error(const DensityMatrix& rho);
double min_eigenvalue(const DensityMatrix& rho);

/// Reusable evaluator for amplitude_expectation (caches the embedded operator).
class AmplitudeObservable {
public:
    explicit AmplitudeObservable(const Basis& b);
    cplx operator()(const Eigen::MatrixXcd& rho) const;

private:
    SparseOp op_;
};

// ---------------------------------------------------------------- integration

struct MasterOptions {
    double atol = 1e-11;
    double rtol = 1e-9;
    Execution exec = Execution::serial;
};

/// Calls observe(i, t_i, rho(t_i)) for each grid time; observe may return
/// false to stop early.
using MasterObserver = std::function<bool(std::size_t, double, const Eigen::MatrixXcd&)>;
void integrate_master(const Generator& gen, const DensityMatrix& rho0,
                      const std::vector<double>& times, const MasterOptions& opts,
                      const MasterObserver& observe);

/// Snapshots at every grid time.
std::vector<DensityMatrix> integrate_master(const Generator& gen, const DensityMatrix& rho0,
                                            const TimeGrid& grid, const MasterOptions& opts = {});

// ---------------------------------------------------------------- amplitude sweep

struct SteadyOptions {
    double t_max = 2000.0;
    double window = 10.0;         // trailing window, 1/Gamma2
    double sample_dt = 1.0;       // spacing of drift samples
    double drift_tol = 1e-6;      // |d|<a>|/dt| threshold, Gamma2
    MasterOptions master;
};

struct AmplitudePoint {
    double eta = 0.0;
    double amplitude = 0.0;
    cplx mean_a{0.0, 0.0};
    double t_final = 0.0;
    bool converged = false;
};

/// Integrates the collective model from the coherent state sqrt(2 eta) e^{-i pi/4}
/// until the trailing-window drift criterion holds or t_max is reached.
/// Returns the final state through `rho_out` when non-null.
AmplitudePoint steady_amplitude(int n, double eta, const SteadyOptions& opts,
                                DensityMatrix* rho_out = nullptr);

/// Points run concurrently (one integration per task, serial kernels inside).
std::vector<AmplitudePoint> steady_amplitude_sweep(int n, const std::vector<double>& eta_grid,
                                                   const SteadyOptions& opts,
                                                   Execution exec = Execution::parallel);

// ---------------------------------------------------------------- wigner

struct WignerGrid {
    std::vector<double> re_axis;
    std::vector<double> im_axis;
    Eigen::MatrixXd values;  // values(i_im, i_re)
    bool window_exceeds_truncation = false;  // some |beta|^2 > (dim - 1)/2
};

/// W(beta) = (2/pi) Tr[rho D(beta) Pi D(beta)^dag], rho read as an oscillator
/// state in the Fock basis n = excitations; the displacement is not truncated.
WignerGrid wigner(const DensityMatrix& rho, const std::vector<double>& re_axis,
                  const std::vector<double>& im_axis, Execution exec = Execution::parallel);

/// Straightforward version: dense matrix exponential in a zero-padded space.
double wigner_point_reference(const DensityMatrix& rho, cplx beta);

} // namespace spincat
