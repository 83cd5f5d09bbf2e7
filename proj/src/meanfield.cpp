#include "spincat/meanfield.hpp"

#include <cmath>
#include <numbers>

namespace spincat {

namespace {

using cd = std::complex<double>;

constexpr double kQuarterPi = 0.25 * std::numbers::pi;

struct SpinTerms {
    cd ds;
    double dz;
};

// Derivative of one spin given its own state and the mean fields built from
// all other spins.
SpinTerms spin_rhs(cd s, double z, cd c1, double c2, double delta, double eta, cd phase, double g,
                   double n) {
    const double c1sq = std::norm(c1);
    const double k = c2 / n + c1sq;
    const double b = 2.0 * c2 + n * c1sq;
    const cd i(0.0, 1.0);
    const cd ds = i * delta * s - 2.0 * i * eta * phase * z * std::conj(c1) - 2.0 * g * s * k +
                  g * z * c1 * b;
    const double dz = 8.0 * eta * std::imag(std::conj(phase) * s * c1) - 4.0 * g * (1.0 + z) * k -
                      4.0 * g * std::real(s * std::conj(c1) * b);
    return {ds, dz};
}

void check_sizes(std::size_t n, const EnsembleParams& params, const std::vector<double>& detunings) {
    if (n != static_cast<std::size_t>(params.n_spins) || detunings.size() != n) {
        throw ConfigError("mean field: state, n_spins and detunings must have the same length");
    }
}

double sync_root(int n, double eta) {
    const double x = 1.0 - 16.0 * eta / n;
    if (x < 0.0) {
        throw ConfigError("no synchronized steady state for eta/N > 1/16 (eta = " +
                          std::to_string(eta) + ", N = " + std::to_string(n) + ")");
    }
    return std::sqrt(x);
}

} // namespace

double MeanFieldState::max_bloch_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        m = std::max(m, 4.0 * std::norm(coherences[i]) + inversions[i] * inversions[i]);
    }
    return m;
}

Eigen::VectorXd pack(const MeanFieldState& s) {
    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::VectorXd y(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = s.coherences[static_cast<std::size_t>(i)].real();
        y(n + i) = s.coherences[static_cast<std::size_t>(i)].imag();
        y(2 * n + i) = s.inversions[static_cast<std::size_t>(i)];
    }
    return y;
}

MeanFieldState unpack(const Eigen::VectorXd& y) {
    const Eigen::Index n = y.size() / 3;
    MeanFieldState s;
    s.coherences.resize(static_cast<std::size_t>(n));
    s.inversions.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        s.coherences[static_cast<std::size_t>(i)] = {y(i), y(n + i)};
        s.inversions[static_cast<std::size_t>(i)] = y(2 * n + i);
    }
    return s;
}

void mf_rhs_full(const Eigen::VectorXd& y, const EnsembleParams& params,
                 const std::vector<double>& detunings, Eigen::VectorXd& dy, Execution exec) {
    const Eigen::Index n = y.size() / 3;
    check_sizes(static_cast<std::size_t>(n), params, detunings);
    dy.resize(y.size());
    cd total(0.0, 0.0);
    double total_z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        total += cd(y(j), y(n + j));
        total_z += 1.0 + y(2 * n + j);
    }
    const double nd = static_cast<double>(n);
    const cd phase = std::polar(1.0, params.phase_phi);
    for_each_index(static_cast<std::size_t>(n), exec, [&](std::size_t mi) {
        const auto m = static_cast<Eigen::Index>(mi);
        const cd s(y(m), y(n + m));
        const double z = y(2 * n + m);
        const cd c1 = (total - s) / nd;
        const double c2 = (total_z - (1.0 + z)) / (2.0 * nd);
        const SpinTerms t = spin_rhs(s, z, c1, c2, detunings[mi], params.eta, phase, params.gamma2, nd);
        dy(m) = t.ds.real();
        dy(n + m) = t.ds.imag();
        dy(2 * n + m) = t.dz;
    });
}

MeanFieldState mf_rhs_full(const MeanFieldState& state, const EnsembleParams& params,
                           const std::vector<double>& detunings) {
    Eigen::VectorXd dy;
    mf_rhs_full(pack(state), params, detunings, dy);
    return unpack(dy);
}

MeanFieldState mf_rhs_full_reference(const MeanFieldState& state, const EnsembleParams& params,
                                     const std::vector<double>& detunings) {
    const std::size_t n = state.size();
    check_sizes(n, params, detunings);
    const double nd = static_cast<double>(n);
    const cd phase = std::polar(1.0, params.phase_phi);
    MeanFieldState out;
    out.coherences.resize(n);
    out.inversions.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        cd c1(0.0, 0.0);
        double c2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != m) {
                c1 += state.coherences[j];
                c2 += 1.0 + state.inversions[j];
            }
        }
        c1 /= nd;
        c2 /= 2.0 * nd;
        const SpinTerms t = spin_rhs(state.coherences[m], state.inversions[m], c1, c2, detunings[m],
                                     params.eta, phase, params.gamma2, nd);
        out.coherences[m] = t.ds;
        out.inversions[m] = t.dz;
    }
    return out;
}

Eigen::Vector3d mf_rhs_symmetric(const Eigen::Vector3d& s, const EnsembleParams& params) {
    const double a = s(0);
    const double phi = s(1);
    const double z = s(2);
    const double eta = params.eta;
    const double g = params.gamma2;
    const double n = params.n_spins;
    const double a2 = a * a;
    return {a * (-2.0 * eta * z * std::sin(2.0 * phi) - 2.0 * g * a2 + n * g * z * a2),
            -2.0 * eta * z * a * std::cos(2.0 * phi),
            a2 * (8.0 * eta * std::sin(2.0 * phi) - 4.0 * g * (1.0 + z) - 4.0 * g * n * a2)};
}

ReducedState symmetric_steady_state(int n, double eta) {
    if (n < 1 || !(eta >= 0.0)) {
        throw ConfigError("symmetric_steady_state: need N >= 1 and eta >= 0");
    }
    const double r = sync_root(n, eta);
    const double a2 = (4.0 * eta - 1.0 + r) / (2.0 * n);
    return {std::sqrt(std::max(0.0, a2)), kQuarterPi, -0.5 * (1.0 + r)};
}

ReducedState symmetric_fixed_point(int n, double eta) {
    if (n < 1 || !(eta >= 0.0)) {
        throw ConfigError("symmetric_fixed_point: need N >= 1 and eta >= 0");
    }
    const double nd = n;
    const double disc = (nd - 2.0) * (nd - 2.0) - 4.0 * nd * (4.0 * eta - 2.0);
    if (disc < 0.0) {
        throw ConfigError("symmetric_fixed_point: no synchronized root for eta = " + std::to_string(eta));
    }
    const double z = (-(nd - 2.0) - std::sqrt(disc)) / (2.0 * nd);
    const double a2 = (2.0 * eta - 1.0 - z) / nd;
    if (a2 < 0.0) {
        throw ConfigError("symmetric_fixed_point: root has negative A^2");
    }
    return {std::sqrt(a2), kQuarterPi, z};
}

Eigen::Vector3d mf_rhs_two_ensemble(const Eigen::Vector3d& s, const EnsembleParams& params,
                                    double delta) {
    const double a = s(0);
    const double ze = s(1);
    const double z = s(2);
    const double eta = params.eta;
    const double g = params.gamma2;
    const double n = params.n_spins;
    const double a2 = a * a;
    const double c = std::cos(ze);
    const double cc = c * c;
    const double cos2 = std::cos(2.0 * ze);
    const double sin2 = std::sin(2.0 * ze);
    const double r = (n - 1.0) / n;
    const double c2 = 0.5 * r * (1.0 + z);
    const double c1sq = a2 * (cc * (1.0 - 2.0 / n) + 1.0 / (n * n));
    const double k = c2 / n + c1sq;
    const double b = r * (1.0 + z) + a2 * (n - 2.0) * cc + a2 / n;
    const double drive = cc - cos2 / n;
    const double loss = cc - 1.0 / n;
    return {a * (-2.0 * eta * z * drive - 2.0 * g * k + g * z * loss * b),
            delta + eta * z * (1.0 - 2.0 / n) * sin2 - 0.5 * g * z * b * sin2,
            8.0 * eta * a2 * drive - 4.0 * g * (1.0 + z) * k - 4.0 * g * a2 * loss * b};
}

Eigen::Vector3d mf_rhs_two_ensemble_printed(const Eigen::Vector3d& s, const EnsembleParams& params,
                                            double delta) {
    const double a = s(0);
    const double ze = s(1);
    const double z = s(2);
    const double eta = params.eta;
    const double g = params.gamma2;
    const double n = params.n_spins;
    const double cc = std::cos(ze) * std::cos(ze);
    const double cos2 = std::cos(2.0 * ze);
    const double sin2 = std::sin(2.0 * ze);
    const double b = 1.0 + z + n * a * a * (1.0 - 2.0 / n) * cc;
    return {a * (-2.0 * eta * z * (cc - cos2 / n) + g * z * (cc - 1.0 / n) * b),
            delta + eta * z * (1.0 - 2.0 / n) * sin2 - 0.5 * g * z * b * sin2,
            a * a * (8.0 * eta * (cc - cos2 / n) - 4.0 * g * (cc - 1.0 / n) * b - 4.0 * g * (1.0 + z) * cc)};
}

ReducedState two_ensemble_steady_state_small_delta(int n, double eta, double delta) {
    if (n < 2 || n % 2 != 0) {
        throw ConfigError("two-group model needs an even N >= 2");
    }
    ReducedState s = symmetric_steady_state(n, eta);
    if (delta == 0.0) {
        s.phase = 0.0;
        return s;
    }
    if (eta == 0.0) {
        throw ConfigError("linear response is undefined at eta = 0");
    }
    const double r = sync_root(n, eta);
    const double nd = n;
    s.phase = (1.0 + r) * nd * nd * delta / (32.0 * eta * eta);
    return s;
}

std::vector<ReducedState> integrate_reduced(ReducedModel model, const EnsembleParams& params,
                                            double delta, const ReducedState& start,
                                            const std::vector<double>& times,
                                            const OdeOptions& opts) {
    params.validate();
    if (model != ReducedModel::symmetric) {
        if (params.n_spins % 2 != 0) {
            throw ConfigError("two-group model needs an even number of spins");
        }
        if (params.phase_phi != 0.0) {
            throw ConfigError("reduced two-group model assumes phase_phi = 0");
        }
    }
    Dopri5<Eigen::Vector3d> ode(
        [&](double, const Eigen::Vector3d& y, Eigen::Vector3d& dy) {
            switch (model) {
            case ReducedModel::symmetric:
                dy = mf_rhs_symmetric(y, params);
                break;
            case ReducedModel::two_ensemble:
                dy = mf_rhs_two_ensemble(y, params, delta);
                break;
            case ReducedModel::two_ensemble_printed:
                dy = mf_rhs_two_ensemble_printed(y, params, delta);
                break;
            }
        },
        opts);
    std::vector<ReducedState> out;
    out.reserve(times.size());
    if (times.empty()) {
        return out;
    }
    ode.solve(times.front(), start.vec(), times, [&](std::size_t, double, const Eigen::Vector3d& y) {
        out.push_back(ReducedState::from(y));
        return true;
    });
    return out;
}

void integrate_full(const EnsembleParams& params, const std::vector<double>& detunings,
                    const MeanFieldState& start, const std::vector<double>& times,
                    const OdeOptions& opts, Execution exec, const FullObserver& observe) {
    params.validate();
    check_sizes(start.size(), params, detunings);
    if (times.empty()) {
        return;
    }
    Dopri5<Eigen::VectorXd> ode(
        [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
            mf_rhs_full(y, params, detunings, dy, exec);
        },
        opts);
    ode.solve(times.front(), pack(start), times, observe);
}

MeanFieldState two_group_state(int n, const ReducedState& s) {
    if (n < 2 || n % 2 != 0) {
        throw ConfigError("two-group state needs an even N >= 2");
    }
    MeanFieldState out;
    out.coherences.resize(static_cast<std::size_t>(n));
    out.inversions.assign(static_cast<std::size_t>(n), s.inversion);
    for (int m = 0; m < n; ++m) {
        const double sign = m < n / 2 ? 1.0 : -1.0;
        out.coherences[static_cast<std::size_t>(m)] = std::polar(s.amplitude, kQuarterPi + sign * s.phase);
    }
    return out;
}

MeanFieldState symmetric_state(int n, const ReducedState& s) {
    MeanFieldState out;
    out.coherences.assign(static_cast<std::size_t>(n), std::polar(s.amplitude, s.phase));
    out.inversions.assign(static_cast<std::size_t>(n), s.inversion);
    return out;
}

ReducedState two_group_projection(const MeanFieldState& s) {
    if (s.size() == 0) {
        throw ConfigError("empty mean-field state");
    }
    return {std::abs(s.coherences[0]), std::arg(s.coherences[0]) - kQuarterPi, s.inversions[0]};
}

} // namespace spincat
