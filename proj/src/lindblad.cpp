#include "spincat/lindblad.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace spincat {

namespace {

using Triplet = Eigen::Triplet<cplx>;

SparseOp from_triplets(std::size_t dim, const std::vector<Triplet>& trips) {
    SparseOp m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

SparseOp product(const SparseOp& a, const SparseOp& b) {
    SparseOp p = (a * b).pruned();
    p.makeCompressed();
    return p;
}

SparseOp adjoint(const SparseOp& a) {
    SparseOp m = a.adjoint();
    m.makeCompressed();
    return m;
}

int excitations(const Basis& b, std::size_t index) {
    return b.kind == BasisKind::full ? std::popcount(index) : static_cast<int>(index);
}

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Amplitude of |theta, phi> on the k-excitation Dicke state (collective basis).
Eigen::VectorXcd css_collective(int n, const SpinCoherentParams& css) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n + 1);
    const double c = std::cos(0.5 * css.theta);
    const double s = std::sin(0.5 * css.theta);
    if (s == 0.0) {
        v(0) = 1.0;
        return v;
    }
    for (int k = 0; k <= n; ++k) {
        const double logm = 0.5 * log_binomial(n, k) + (n - k) * std::log(c) + k * std::log(s);
        v(k) = std::polar(std::exp(logm), k * css.phi);
    }
    return v;
}

Eigen::VectorXcd css_full(int n, const SpinCoherentParams& css) {
    const std::size_t dim = std::size_t{1} << n;
    Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
    const double c = std::cos(0.5 * css.theta);
    const double s = std::sin(0.5 * css.theta);
    for (std::size_t i = 0; i < dim; ++i) {
        const int k = std::popcount(i);
        v(static_cast<Eigen::Index>(i)) = std::polar(std::pow(c, n - k) * std::pow(s, k), k * css.phi);
    }
    return v;
}

Eigen::VectorXcd css_in(const Basis& b, const SpinCoherentParams& css) {
    switch (b.kind) {
    case BasisKind::full:
        return css_full(b.n, css);
    case BasisKind::collective:
        return css_collective(b.n, css);
    case BasisKind::bosonic:
        break;
    }
    throw ConfigError("spin coherent states are not defined in the bosonic basis");
}

} // namespace

std::size_t Basis::dim() const {
    return kind == BasisKind::full ? (std::size_t{1} << n) : static_cast<std::size_t>(n) + 1;
}

std::string to_string(const Basis& b) {
    switch (b.kind) {
    case BasisKind::full:
        return "full(N=" + std::to_string(b.n) + ")";
    case BasisKind::collective:
        return "collective(N=" + std::to_string(b.n) + ")";
    case BasisKind::bosonic:
        return "bosonic(dim=" + std::to_string(b.n + 1) + ")";
    }
    return "?";
}

SparseOp collective_lowering(const Basis& b) {
    std::vector<Triplet> trips;
    if (b.kind == BasisKind::full) {
        const std::size_t dim = b.dim();
        for (std::size_t s = 0; s < dim; ++s) {
            for (int i = 0; i < b.n; ++i) {
                const std::size_t bit = std::size_t{1} << i;
                if (s & bit) {
                    trips.emplace_back(static_cast<int>(s ^ bit), static_cast<int>(s), 1.0);
                }
            }
        }
        return from_triplets(dim, trips);
    }
    if (b.kind == BasisKind::bosonic) {
        throw ConfigError("collective_lowering: not defined on the bosonic basis");
    }
    for (int k = 1; k <= b.n; ++k) {
        trips.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k) * (b.n - k + 1)));
    }
    return from_triplets(b.dim(), trips);
}

SparseOp truncated_annihilation(int dim) {
    std::vector<Triplet> trips;
    for (int k = 1; k < dim; ++k) {
        trips.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
    }
    return from_triplets(static_cast<std::size_t>(dim), trips);
}

Eigen::MatrixXcd symmetric_embedding(int n) {
    if (n < 1 || n > kFullBasisCap) {
        throw ConfigError("symmetric_embedding: N out of range");
    }
    const std::size_t dim = std::size_t{1} << n;
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), n + 1);
    for (std::size_t s = 0; s < dim; ++s) {
        const int k = std::popcount(s);
        v(static_cast<Eigen::Index>(s), k) = std::exp(-0.5 * log_binomial(n, k));
    }
    return v;
}

// ---------------------------------------------------------------- generator

Generator::Generator(Basis b, Eigen::VectorXd detuning, SparseOp j, cplx drive, double rate)
    : basis_(b), diag_(std::move(detuning)), j_(std::move(j)), jd_(adjoint(j_)), drive_(drive),
      rate_(rate) {
    std::vector<Triplet> diag;
    for (Eigen::Index i = 0; i < diag_.size(); ++i) {
        if (diag_(i) != 0.0) {
            diag.emplace_back(static_cast<int>(i), static_cast<int>(i), diag_(i));
        }
    }
    if (b.kind != BasisKind::full) {
        band_.assign(b.dim(), cplx(0.0, 0.0));
        for (Eigen::Index r = 0; r < j_.outerSize(); ++r) {
            for (SparseOp::InnerIterator it(j_, r); it; ++it) {
                if (it.col() != r + 2) {
                    throw Error("generator: jump operator is not a double lowering");
                }
                band_[static_cast<std::size_t>(it.col())] = it.value();
            }
        }
    }
    h_ = drive_ * j_ + std::conj(drive_) * jd_ + from_triplets(b.dim(), diag);
    h_.prune(cplx(0.0, 0.0));
    h_.makeCompressed();
}

Generator Generator::full(const EnsembleParams& params, const std::vector<double>& detunings) {
    params.validate();
    const int n = params.n_spins;
    if (n > kFullBasisCap) {
        const double dim = std::ldexp(1.0, n);
        // state, 7 stages and ~4 work matrices of dim^2 complex doubles
        const double gib = dim * dim * 16.0 * 12.0 / (1024.0 * 1024.0 * 1024.0);
        std::ostringstream os;
        os.precision(3);
        os << "full basis supports N <= " << kFullBasisCap << "; N = " << n << " needs about " << gib
           << " GiB of density-matrix storage";
        throw ConfigError(os.str());
    }
    if (detunings.size() != static_cast<std::size_t>(n)) {
        throw ConfigError("full generator: expected " + std::to_string(n) + " detunings, got " +
                          std::to_string(detunings.size()));
    }
    const Basis b{BasisKind::full, n};
    const SparseOp sm = collective_lowering(b);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.dim()));
    for (std::size_t s = 0; s < b.dim(); ++s) {
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = detunings[static_cast<std::size_t>(i)];
            z += (s >> i & 1U) ? d : -d;
        }
        diag(static_cast<Eigen::Index>(s)) = 0.5 * z;
    }
    return Generator(b, std::move(diag), product(sm, sm), std::polar(params.eta / n, params.phase_phi),
                     params.gamma2 / (static_cast<double>(n) * n));
}

Generator Generator::collective(const EnsembleParams& params, const std::vector<double>& detunings) {
    params.validate();
    for (double d : detunings) {
        if (d != 0.0) {
            throw ConfigError("collective generator requires all detunings to be zero");
        }
    }
    const int n = params.n_spins;
    const Basis b{BasisKind::collective, n};
    const SparseOp sm = collective_lowering(b);
    return Generator(b, Eigen::VectorXd::Zero(n + 1), product(sm, sm),
                     std::polar(params.eta / n, params.phase_phi),
                     params.gamma2 / (static_cast<double>(n) * n));
}

Generator Generator::bosonic(const EnsembleParams& params, int dim) {
    params.validate();
    if (dim < 1) {
        throw ConfigError("bosonic generator: dim must be >= 1");
    }
    const Basis b{BasisKind::bosonic, dim - 1};
    const SparseOp a = truncated_annihilation(dim);
    return Generator(b, Eigen::VectorXd::Zero(dim), product(a, a), std::polar(params.eta, params.phase_phi),
                     params.gamma2);
}

void sparse_times_dense(const SparseOp& a, const Eigen::MatrixXcd& b, Eigen::MatrixXcd& out,
                        Execution exec) {
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = b.cols();
    out.resize(rows, cols);
    const auto* outer = a.outerIndexPtr();
    const auto* inner = a.innerIndexPtr();
    const auto* vals = a.valuePtr();
    for_each_index(static_cast<std::size_t>(cols), exec, [&](std::size_t ci) {
        const auto c = static_cast<Eigen::Index>(ci);
        const cplx* bc = b.col(c).data();
        cplx* oc = out.col(c).data();
        for (Eigen::Index r = 0; r < rows; ++r) {
            // written out: std::complex operator* takes the slow inf/nan path
            double re = 0.0;
            double im = 0.0;
            for (auto p = outer[r]; p < outer[r + 1]; ++p) {
                const cplx v = vals[p];
                const cplx x = bc[inner[p]];
                re += v.real() * x.real() - v.imag() * x.imag();
                im += v.real() * x.imag() + v.imag() * x.real();
            }
            oc[r] = cplx(re, im);
        }
    });
}

namespace {

// Collective/bosonic bases: J only lowers by two, J[k-2, k] = c_k. Every term
// of the Lindblad form is then local in (i, j):
//   (H rho)_ij   = d_i rho_ij + w c_{i+2} rho_{i+2,j} + conj(w c_i) rho_{i-2,j}
//   (J rho J+)_ij = c_{i+2} rho_{i+2,j+2} conj(c_{j+2})
//   (J+J)_ii     = |c_i|^2
// Only i <= j is computed; the lower triangle is its conjugate.
void apply_banded(const Eigen::VectorXd& d, const std::vector<cplx>& c, cplx w, double rate,
                  const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& drho, Execution exec) {
    const Eigen::Index n = rho.rows();
    drho.resize(n, n);
    auto cc = [&](Eigen::Index k) { return (k >= 2 && k < n) ? c[static_cast<std::size_t>(k)] : cplx(0.0); };
    auto at = [&](Eigen::Index i, Eigen::Index j) {
        return (i >= 0 && i < n && j >= 0 && j < n) ? rho(i, j) : cplx(0.0);
    };
    for_each_index(static_cast<std::size_t>(n), exec, [&](std::size_t js) {
        const auto j = static_cast<Eigen::Index>(js);
        const cplx cj = cc(j);
        const cplx cj2 = cc(j + 2);
        const double nj = std::norm(cj);
        for (Eigen::Index i = 0; i <= j; ++i) {
            const cplx ci = cc(i);
            const cplx ci2 = cc(i + 2);
            const cplx r = rho(i, j);
            const cplx h_rho = d(i) * r + w * ci2 * at(i + 2, j) + std::conj(w * ci) * at(i - 2, j);
            const cplx rho_h = r * d(j) + w * cj * at(i, j - 2) + std::conj(w * cj2) * at(i, j + 2);
            const cplx jump = ci2 * at(i + 2, j + 2) * std::conj(cj2);
            const cplx v = cplx(0.0, -1.0) * (h_rho - rho_h) +
                           rate * (jump - 0.5 * (std::norm(ci) + nj) * r);
            if (i == j) {
                drho(i, i) = cplx(v.real(), 0.0);
            } else {
                drho(i, j) = v;
                drho(j, i) = std::conj(v);
            }
        }
    });
}

} // namespace

// With Y = J rho:
//   X = -i (diag rho + drive Y + conj(drive) J^dag rho) - (rate/2) J^dag Y
//   drho = X + X^dag + rate J Y^dag   (J rho J^dag = J (J rho)^dag)
void Generator::apply(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& drho, Execution exec) const {
    if (!band_.empty()) {
        apply_banded(diag_, band_, drive_, rate_, rho, drho, exec);
        return;
    }
    thread_local Eigen::MatrixXcd x, y, w, z, yd;
    const cplx mi(0.0, -1.0);
    sparse_times_dense(j_, rho, y, exec);
    sparse_times_dense(jd_, rho, w, exec);
    x = mi * (diag_.asDiagonal() * rho + drive_ * y + std::conj(drive_) * w);
    if (rate_ != 0.0) {
        sparse_times_dense(jd_, y, z, exec);
        x -= (0.5 * rate_) * z;
    }
    drho = x + x.adjoint();
    if (rate_ != 0.0) {
        yd = y.adjoint();
        sparse_times_dense(j_, yd, z, exec);
        drho += (0.5 * rate_) * (z + z.adjoint());
    }
}

Eigen::MatrixXcd Generator::apply_reference(const Eigen::MatrixXcd& rho) const {
    const Eigen::MatrixXcd h = Eigen::MatrixXcd(h_);
    const Eigen::MatrixXcd j = Eigen::MatrixXcd(j_);
    const Eigen::MatrixXcd jdj = j.adjoint() * j;
    const cplx mi(0.0, -1.0);
    Eigen::MatrixXcd out = mi * (h * rho - rho * h);
    out += rate_ * (j * rho * j.adjoint() - 0.5 * (jdj * rho + rho * jdj));
    return out;
}

// ---------------------------------------------------------------- states

PureState prepare_pure(const StateSpec& spec, const Basis& basis, std::string* warning) {
    if (basis.kind == BasisKind::full && (basis.n < 1 || basis.n > kFullBasisCap)) {
        throw ConfigError("full basis supports 1 <= N <= " + std::to_string(kFullBasisCap));
    }
    if (basis.n < 1 && basis.kind != BasisKind::bosonic) {
        throw ConfigError("N must be >= 1");
    }
    PureState out{basis, {}};
    switch (spec.kind) {
    case StateSpec::Kind::css:
        if (!(spec.css.theta >= 0.0 && spec.css.theta < std::numbers::pi)) {
            throw ConfigError("theta must lie in [0, pi)");
        }
        out.psi = css_in(basis, spec.css);
        break;
    case StateSpec::Kind::cat_even:
    case StateSpec::Kind::cat_odd: {
        if (!(spec.css.theta >= 0.0 && spec.css.theta < std::numbers::pi)) {
            throw ConfigError("theta must lie in [0, pi)");
        }
        const bool odd = spec.kind == StateSpec::Kind::cat_odd;
        if (odd && spec.css.theta == 0.0) {
            throw ConfigError("odd cat state is undefined at theta = 0");
        }
        SpinCoherentParams flipped = spec.css;
        flipped.phi += std::numbers::pi;
        const Eigen::VectorXcd a = css_in(basis, spec.css);
        const Eigen::VectorXcd b = css_in(basis, flipped);
        out.psi = odd ? Eigen::VectorXcd(a - b) : Eigen::VectorXcd(a + b);
        const double nrm = out.psi.norm();
        if (!(nrm > 0.0)) {
            throw NumericalError("cat state has zero norm");
        }
        out.psi /= nrm;
        break;
    }
    case StateSpec::Kind::coherent: {
        if (basis.kind == BasisKind::full) {
            throw ConfigError("bosonic coherent states need the collective or bosonic basis");
        }
        const int dim = static_cast<int>(basis.dim());
        const double mag = std::abs(spec.alpha);
        out.psi = Eigen::VectorXcd::Zero(dim);
        if (mag == 0.0) {
            out.psi(0) = 1.0;
        } else {
            std::vector<double> logm(static_cast<std::size_t>(dim));
            double mx = -INFINITY;
            for (int k = 0; k < dim; ++k) {
                logm[static_cast<std::size_t>(k)] = k * std::log(mag) - 0.5 * std::lgamma(k + 1.0);
                mx = std::max(mx, logm[static_cast<std::size_t>(k)]);
            }
            const double ph = std::arg(spec.alpha);
            for (int k = 0; k < dim; ++k) {
                out.psi(k) = std::polar(std::exp(logm[static_cast<std::size_t>(k)] - mx), k * ph);
            }
            out.psi /= out.psi.norm();
        }
        if (warning != nullptr && mag * mag > 0.5 * (dim - 1)) {
            std::ostringstream os;
            os << "coherent amplitude |alpha|^2 = " << mag * mag << " exceeds N/2 = " << 0.5 * (dim - 1)
               << "; truncation is significant";
            *warning = os.str();
        }
        break;
    }
    }
    return out;
}

DensityMatrix to_density(const PureState& psi) {
    return {psi.basis, psi.psi * psi.psi.adjoint()};
}

DensityMatrix prepare_state(const StateSpec& spec, const Basis& basis, std::string* warning) {
    return to_density(prepare_pure(spec, basis, warning));
}

// ---------------------------------------------------------------- observables

double fidelity_to(const DensityMatrix& rho, const PureState& psi) {
    if (!(rho.basis == psi.basis)) {
        throw ConfigError("fidelity_to: basis mismatch (" + to_string(rho.basis) + " vs " +
                          to_string(psi.basis) + ")");
    }
    return std::real(psi.psi.dot(rho.rho * psi.psi));
}

double parity_expectation(const DensityMatrix& rho) {
    double p = 0.0;
    for (Eigen::Index i = 0; i < rho.rho.rows(); ++i) {
        const double sign = (excitations(rho.basis, static_cast<std::size_t>(i)) % 2 == 0) ? 1.0 : -1.0;
        p += sign * std::real(rho.rho(i, i));
    }
    return p;
}

AmplitudeObservable::AmplitudeObservable(const Basis& b) {
    if (b.kind == BasisKind::full) {
        const Eigen::MatrixXcd v = symmetric_embedding(b.n);
        const Eigen::MatrixXcd a = Eigen::MatrixXcd(truncated_annihilation(b.n + 1));
        const Eigen::MatrixXcd full = v * a * v.adjoint();
        op_ = full.sparseView(cplx(0.0, 0.0), 1e-14);
        op_.makeCompressed();
    } else {
        op_ = truncated_annihilation(static_cast<int>(b.dim()));
    }
}

cplx AmplitudeObservable::operator()(const Eigen::MatrixXcd& rho) const {
    // Tr(A rho) = sum_ij A_ij rho_ji
    cplx acc(0.0, 0.0);
    for (Eigen::Index r = 0; r < op_.outerSize(); ++r) {
        for (SparseOp::InnerIterator it(op_, r); it; ++it) {
            acc += it.value() * rho(it.col(), r);
        }
    }
    return acc;
}

cplx amplitude_expectation(const DensityMatrix& rho) {
    return AmplitudeObservable(rho.basis)(rho.rho);
}

cplx trace(const DensityMatrix& rho) { return rho.rho.trace(); }

double hermiticity_error(const DensityMatrix& rho) {
    return (rho.rho - rho.rho.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const DensityMatrix& rho) {
    const Eigen::MatrixXcd h = 0.5 * (rho.rho + rho.rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------- integration

void integrate_master(const Generator& gen, const DensityMatrix& rho0,
                      const std::vector<double>& times, const MasterOptions& opts,
                      const MasterObserver& observe) {
    if (!(rho0.basis == gen.basis())) {
        throw ConfigError("integrate_master: initial state basis " + to_string(rho0.basis) +
                          " does not match generator basis " + to_string(gen.basis()));
    }
    if (times.empty()) {
        return;
    }
    OdeOptions o;
    o.atol = opts.atol;
    o.rtol = opts.rtol;
    const Execution exec = opts.exec;
    Dopri5<Eigen::MatrixXcd> ode(
        [&gen, exec](double, const Eigen::MatrixXcd& y, Eigen::MatrixXcd& dy) { gen.apply(y, dy, exec); },
        o);
    ode.solve(times.front(), rho0.rho, times,
              [&](std::size_t i, double t, const Eigen::MatrixXcd& y) { return observe(i, t, y); });
}

std::vector<DensityMatrix> integrate_master(const Generator& gen, const DensityMatrix& rho0,
                                            const TimeGrid& grid, const MasterOptions& opts) {
    grid.validate();
    std::vector<DensityMatrix> out;
    out.reserve(grid.n_points);
    integrate_master(gen, rho0, grid.times(), opts,
                     [&](std::size_t, double, const Eigen::MatrixXcd& y) {
                         out.push_back({rho0.basis, y});
                         return true;
                     });
    return out;
}

// ---------------------------------------------------------------- amplitude sweep

AmplitudePoint steady_amplitude(int n, double eta, const SteadyOptions& opts, DensityMatrix* rho_out) {
    if (!(eta >= 0.0)) {
        throw ConfigError("eta must be >= 0");
    }
    if (!(opts.t_max > 0.0) || !(opts.sample_dt > 0.0) || !(opts.window >= opts.sample_dt)) {
        throw ConfigError("steady amplitude: need t_max > 0 and window >= sample_dt > 0");
    }
    EnsembleParams p;
    p.n_spins = n;
    p.eta = eta;
    const Generator gen = Generator::collective(p);
    StateSpec spec;
    spec.kind = StateSpec::Kind::coherent;
    spec.alpha = std::polar(std::sqrt(2.0 * eta), -0.25 * std::numbers::pi);
    const DensityMatrix rho0 = prepare_state(spec, gen.basis());
    const AmplitudeObservable amp(gen.basis());

    const auto steps = static_cast<std::size_t>(std::ceil(opts.t_max / opts.sample_dt - 1e-9));
    std::vector<double> times(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        times[i] = std::min(opts.t_max, static_cast<double>(i) * opts.sample_dt);
    }
    const auto window = static_cast<std::size_t>(std::llround(opts.window / opts.sample_dt));

    AmplitudePoint pt;
    pt.eta = eta;
    std::vector<double> history;
    history.reserve(times.size());
    integrate_master(gen, rho0, times, opts.master,
                     [&](std::size_t i, double t, const Eigen::MatrixXcd& y) {
                         const cplx a = amp(y);
                         history.push_back(std::abs(a));
                         pt.mean_a = a;
                         pt.amplitude = std::abs(a);
                         pt.t_final = t;
                         if (rho_out != nullptr) {
                             rho_out->basis = gen.basis();
                             rho_out->rho = y;
                         }
                         if (i >= window) {
                             double worst = 0.0;
                             for (std::size_t k = i - window + 1; k <= i; ++k) {
                                 const double dt = times[k] - times[k - 1];
                                 worst = std::max(worst, std::abs(history[k] - history[k - 1]) / dt);
                             }
                             if (worst < opts.drift_tol) {
                                 pt.converged = true;
                                 return false;
                             }
                         }
                         return true;
                     });
    return pt;
}

std::vector<AmplitudePoint> steady_amplitude_sweep(int n, const std::vector<double>& eta_grid,
                                                   const SteadyOptions& opts, Execution exec) {
    std::vector<AmplitudePoint> out(eta_grid.size());
    SteadyOptions inner = opts;
    inner.master.exec = Execution::serial;
    for_each_index(eta_grid.size(), exec,
                   [&](std::size_t i) { out[i] = steady_amplitude(n, eta_grid[i], inner); });
    return out;
}

} // namespace spincat
