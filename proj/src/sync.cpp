#include "spincat/sync.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <unsupported/Eigen/NonLinearOptimization>

namespace spincat {

std::string to_string(SyncStatus s) {
    switch (s) {
    case SyncStatus::synchronized:
        return "synchronized";
    case SyncStatus::unsynchronized:
        return "unsynchronized";
    case SyncStatus::unconverged:
        return "unconverged";
    }
    return "unconverged";
}

SyncStatus sync_status_from_string(const std::string& s) {
    if (s == "synchronized") {
        return SyncStatus::synchronized;
    }
    if (s == "unsynchronized") {
        return SyncStatus::unsynchronized;
    }
    if (s == "unconverged") {
        return SyncStatus::unconverged;
    }
    throw ConfigError("unknown sync status '" + s + "'");
}

SyncPhasePoint classify_sync(int n, double eta_tilde, double delta_tilde, const SyncOptions& opts) {
    if (n < 2 || n % 2 != 0) {
        throw ConfigError("classify_sync: N must be even and >= 2");
    }
    if (!(eta_tilde >= 0.0) || !std::isfinite(delta_tilde)) {
        throw ConfigError("classify_sync: need eta >= 0 and finite delta");
    }
    if (!(opts.budget > 0.0) || !(opts.sample_dt > 0.0) || !(opts.window > 0.0)) {
        throw ConfigError("classify_sync: budget, sample_dt and window must be > 0");
    }
    const double nd = n;
    const double delta = delta_tilde / (nd * nd);
    EnsembleParams params;
    params.n_spins = n;
    params.eta = eta_tilde;

    ReducedState start;
    if (opts.ground_start) {
        start = {1e-3, 0.0, -1.0 + 2e-6};
    } else {
        const double r = std::sqrt(std::max(0.0, 1.0 - 16.0 * eta_tilde / nd));
        start = {std::sqrt(std::max(0.0, (4.0 * eta_tilde - 1.0 + r) / (2.0 * nd))), 0.0, -0.5 * (1.0 + r)};
    }
    const double collapse = opts.collapse_fraction * std::sqrt(2.0 * eta_tilde / nd);

    const auto steps = static_cast<std::size_t>(std::ceil(opts.budget / opts.sample_dt - 1e-9));
    std::vector<double> times(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        times[i] = std::min(opts.budget, static_cast<double>(i) * opts.sample_dt);
    }

    OdeOptions o;
    o.atol = opts.atol;
    o.rtol = opts.rtol;
    Dopri5<Eigen::Vector3d> ode(
        [&](double, const Eigen::Vector3d& y, Eigen::Vector3d& dy) {
            dy = mf_rhs_two_ensemble(y, params, delta);
        },
        o);

    SyncPhasePoint pt;
    pt.eta_tilde = eta_tilde;
    pt.delta_tilde = delta_tilde;
    pt.status = SyncStatus::unconverged;
    double settled_since = -1.0;
    // Rates are finite differences between samples: the RHS evaluated at the
    // integrated state amplifies tolerance-level jitter by the stiffness.
    Eigen::Vector3d prev = start.vec();
    double t_prev = 0.0;
    ode.solve(0.0, start.vec(), times, [&](std::size_t i, double t, const Eigen::Vector3d& y) {
        if (std::abs(y(1)) > opts.escape) {
            pt.status = SyncStatus::unsynchronized;
            return false;
        }
        if (i == 0) {
            return true;
        }
        const double rate = (y - prev).cwiseAbs().maxCoeff() / (t - t_prev);
        prev = y;
        t_prev = t;
        if (rate < opts.drift_tol) {
            if (settled_since < 0.0) {
                settled_since = t;
            }
            if (t - settled_since >= opts.window) {
                if (y(0) >= collapse) {
                    pt.status = SyncStatus::synchronized;
                    pt.zeta_ss = y(1);
                } else {
                    pt.status = SyncStatus::unsynchronized;
                }
                return false;
            }
        } else {
            settled_since = -1.0;
        }
        return true;
    });
    return pt;
}

std::vector<SyncPhasePoint> sync_phase_sweep(int n, const std::vector<double>& eta_grid,
                                             const std::vector<double>& delta_grid,
                                             const SyncOptions& opts, Execution exec) {
    if (eta_grid.empty() || delta_grid.empty()) {
        throw ConfigError("sync_phase_sweep: grids must be non-empty");
    }
    const std::size_t nd = delta_grid.size();
    std::vector<SyncPhasePoint> out(eta_grid.size() * nd);
    for_each_index(out.size(), exec, [&](std::size_t i) {
        out[i] = classify_sync(n, eta_grid[i / nd], delta_grid[i % nd], opts);
    });
    return out;
}

namespace {

// Columns keyed by eta in first-appearance order, each sorted by delta.
std::vector<std::vector<SyncPhasePoint>> columns(const std::vector<SyncPhasePoint>& points) {
    std::vector<std::vector<SyncPhasePoint>> cols;
    std::map<double, std::size_t> index;
    for (const auto& p : points) {
        auto it = index.find(p.eta_tilde);
        if (it == index.end()) {
            it = index.emplace(p.eta_tilde, cols.size()).first;
            cols.emplace_back();
        }
        cols[it->second].push_back(p);
    }
    for (auto& c : cols) {
        std::stable_sort(c.begin(), c.end(), [](const SyncPhasePoint& a, const SyncPhasePoint& b) {
            return a.delta_tilde < b.delta_tilde;
        });
    }
    return cols;
}

// Last synchronized point before the first non-synchronized one.
std::optional<BoundaryPoint> crossing(const std::vector<SyncPhasePoint>& col) {
    if (col.empty() || col.front().status != SyncStatus::synchronized) {
        return std::nullopt;
    }
    for (std::size_t i = 1; i < col.size(); ++i) {
        if (col[i].status != SyncStatus::synchronized) {
            return BoundaryPoint{col[i].eta_tilde, col[i - 1].delta_tilde, col[i].delta_tilde};
        }
    }
    return std::nullopt;
}

} // namespace

std::vector<BoundaryPoint> column_boundary(const std::vector<SyncPhasePoint>& points) {
    std::vector<BoundaryPoint> out;
    for (const auto& col : columns(points)) {
        if (auto b = crossing(col)) {
            out.push_back(*b);
        }
    }
    return out;
}

std::vector<BoundaryPoint> refine_boundary(int n, const std::vector<SyncPhasePoint>& grid,
                                           int iterations, const SyncOptions& opts,
                                           std::vector<SyncPhasePoint>* refined, Execution exec) {
    const auto brackets = column_boundary(grid);
    std::vector<BoundaryPoint> out(brackets.size());
    std::vector<std::vector<SyncPhasePoint>> extra(brackets.size());
    for_each_index(brackets.size(), exec, [&](std::size_t c) {
        BoundaryPoint b = brackets[c];
        for (int it = 0; it < iterations; ++it) {
            const double mid = 0.5 * (b.delta_lo + b.delta_hi);
            const SyncPhasePoint p = classify_sync(n, b.eta_tilde, mid, opts);
            extra[c].push_back(p);
            if (p.status == SyncStatus::synchronized) {
                b.delta_lo = mid;
            } else {
                b.delta_hi = mid;
            }
        }
        out[c] = b;
    });
    if (refined != nullptr) {
        for (const auto& e : extra) {
            refined->insert(refined->end(), e.begin(), e.end());
        }
    }
    return out;
}

namespace {

struct EllipseResidual {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const std::vector<double>& x;
    const std::vector<double>& y;

    int inputs() const { return 2; }
    int values() const { return static_cast<int>(x.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double q = x[i] * (2.0 * p(0) - x[i]);
            f(static_cast<Eigen::Index>(i)) = p(1) * std::sqrt(std::max(0.0, q)) - y[i];
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double q = x[i] * (2.0 * p(0) - x[i]);
            if (q > 0.0) {
                const double s = std::sqrt(q);
                j(r, 0) = p(1) * x[i] / s;
                j(r, 1) = s;
            } else {
                j(r, 0) = 0.0;
                j(r, 1) = 0.0;
            }
        }
        return 0;
    }
};

} // namespace

EllipseFit fit_ellipse_xy(const std::vector<double>& x, const std::vector<double>& y, int n) {
    if (x.size() != y.size()) {
        throw ConfigError("fit_ellipse: x and y lengths differ");
    }
    if (x.size() < 5) {
        throw ConfigError("fit_ellipse: need at least 5 boundary points, got " + std::to_string(x.size()));
    }
    // y^2 = P x - Q x^2 with P = 2 a b^2, Q = b^2 is linear: use it for the start.
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd design(m, 2);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        design(i, 0) = xi;
        design(i, 1) = -xi * xi;
        rhs(i) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d pq = design.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd p(2);
    if (pq(1) > 0.0 && pq(0) > 0.0) {
        p << pq(0) / (2.0 * pq(1)), std::sqrt(pq(1));
    } else {
        const double xmax = *std::max_element(x.begin(), x.end());
        const double ymax = *std::max_element(y.begin(), y.end());
        p << 0.5 * xmax, ymax / std::max(0.5 * xmax, 1e-300);
    }

    EllipseResidual fn{x, y};
    Eigen::LevenbergMarquardt<EllipseResidual> lm(fn);
    lm.parameters.xtol = 1e-15;
    lm.parameters.ftol = 1e-15;
    lm.parameters.maxfev = 10000;
    lm.minimize(p);
    if (!(p(0) > 0.0) || !(p(1) > 0.0) || !p.allFinite()) {
        throw NumericalError("fit_ellipse: fit did not produce positive a, b");
    }
    Eigen::VectorXd f(m);
    fn(p, f);

    EllipseFit out;
    out.a = p(0);
    out.b = p(1);
    out.residual = std::sqrt(f.squaredNorm() / static_cast<double>(m));
    out.eta_c = 2.0 * out.a * n;
    out.delta_c = out.a * out.b;
    out.n = n;
    out.points = x.size();
    return out;
}

EllipseFit fit_ellipse(const std::vector<SyncPhasePoint>& points, int n) {
    if (n < 1) {
        throw ConfigError("fit_ellipse: N must be >= 1");
    }
    bool any_sync = false;
    bool any_other = false;
    for (const auto& p : points) {
        (p.status == SyncStatus::synchronized ? any_sync : any_other) = true;
    }
    if (!any_sync || !any_other) {
        throw ConfigError("fit_ellipse: degenerate boundary (all points in one class)");
    }
    const double nd = n;
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& b : column_boundary(points)) {
        x.push_back(b.eta_tilde / nd);
        y.push_back(b.delta_lo / (nd * nd));
    }
    return fit_ellipse_xy(x, y, n);
}

} // namespace spincat
