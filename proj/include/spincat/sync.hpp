// Synchronization of the two-group mean-field model: point classification,
// (eta~, delta~) phase-diagram sweeps with bisection-refined boundaries, and
// the elliptical boundary fit  y = b sqrt(a^2 - (x - a)^2)  in x = eta/(N G),
// y = delta/G.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "spincat/meanfield.hpp"
#include "spincat/parallel.hpp"

namespace spincat {

enum class SyncStatus { synchronized, unsynchronized, unconverged };

std::string to_string(SyncStatus s);
SyncStatus sync_status_from_string(const std::string& s);

struct SyncPhasePoint {
    double eta_tilde = 0.0;    // eta / Gamma2
    double delta_tilde = 0.0;  // N^2 delta / Gamma2
    std::optional<double> zeta_ss;
    SyncStatus status = SyncStatus::unconverged;
};

struct SyncOptions {
    double budget = 1e4;            // integration time limit, 1/Gamma2
    double sample_dt = 1.0;         // spacing of the settle/escape checks
    double window = 100.0;          // trailing window for the settle test
    double drift_tol = 1e-8;        // bound on |dA/dt|, |dzeta/dt|, |dz/dt| (sample differences), Gamma2
    double escape = 1.5707963267948966;  // |zeta| beyond this: unsynchronized
    double collapse_fraction = 0.1; // A below this times sqrt(2 eta/N): unsynchronized
    bool ground_start = false;      // start near the ground state instead of the sync state
    double atol = 1e-12;
    double rtol = 1e-10;
};

/// Integrates the two-group model from the delta = 0 synchronized state and
/// classifies the outcome. For eta/N > 1/16 the start uses the closed form
/// with its square root clamped at zero.
SyncPhasePoint classify_sync(int n, double eta_tilde, double delta_tilde, const SyncOptions& opts = {});

/// classify_sync on the Cartesian product eta_grid x delta_grid, ordered with
/// delta varying fastest.
std::vector<SyncPhasePoint> sync_phase_sweep(int n, const std::vector<double>& eta_grid,
                                             const std::vector<double>& delta_grid,
                                             const SyncOptions& opts = {},
                                             Execution exec = Execution::parallel);

struct BoundaryPoint {
    double eta_tilde = 0.0;
    double delta_lo = 0.0;  // largest delta~ classified synchronized
    double delta_hi = 0.0;  // smallest delta~ above it classified otherwise
};

/// For every eta column of `grid` with a synchronized -> not-synchronized
/// crossing (scanning delta upward from the lowest value), bisects the
/// bracket `iterations` times. Unconverged counts as not synchronized.
/// All classified refinement points are appended to `refined` if non-null.
std::vector<BoundaryPoint> refine_boundary(int n, const std::vector<SyncPhasePoint>& grid,
                                           int iterations, const SyncOptions& opts,
                                           std::vector<SyncPhasePoint>* refined = nullptr,
                                           Execution exec = Execution::parallel);

struct EllipseFit {
    double a = 0.0;
    double b = 0.0;
    double residual = 0.0;  // RMS of y residuals
    double eta_c = 0.0;     // 2 a N
    double delta_c = 0.0;   // a b
    int n = 0;
    std::size_t points = 0;
};

/// Per-eta column boundary: largest synchronized delta~ in a column that also
/// has a non-synchronized point above it.
std::vector<BoundaryPoint> column_boundary(const std::vector<SyncPhasePoint>& points);

/// Least-squares fit on the column boundary of `points`. Needs >= 5 columns.
EllipseFit fit_ellipse(const std::vector<SyncPhasePoint>& points, int n);

/// Fit on explicit (x, y) pairs in normalized coordinates.
EllipseFit fit_ellipse_xy(const std::vector<double>& x, const std::vector<double>& y, int n);

} // namespace spincat
