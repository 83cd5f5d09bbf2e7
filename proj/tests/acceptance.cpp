// Acceptance run: one PASS/FAIL line per criterion, data files per criterion
// in the output directory. Exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spincat/analytic.hpp"
#include "spincat/csv.hpp"
#include "spincat/lindblad.hpp"
#include "spincat/meanfield.hpp"
#include "spincat/parallel.hpp"
#include "spincat/sync.hpp"

using namespace spincat;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

// Rows keyed by an independent unit of work (a realization, an eta point, ...)
// so that partial recomputations can be compared row by row.
using Rows = std::map<std::string, std::string>;

struct Outcome {
    bool pass = false;
    std::string detail;
    Rows data;
};

std::string fmt(double v) { return csv::format(v); }

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) {
        s += (s.empty() ? "" : ",") + fmt(x);
    }
    return s;
}

std::string short_num(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

struct Conservation {
    double trace = 0.0;      // max |Tr rho - 1|
    double herm = 0.0;       // max |rho - rho^dag|
    double min_eig = 1.0;    // min over sampled snapshots
    double parity = 0.0;     // max |P(t) - P(0)|
    std::size_t snapshots = 0;

    void merge(const Conservation& o) {
        trace = std::max(trace, o.trace);
        herm = std::max(herm, o.herm);
        min_eig = std::min(min_eig, o.min_eig);
        parity = std::max(parity, o.parity);
        snapshots += o.snapshots;
    }
    bool ok() const { return trace <= 1e-8 && herm <= 1e-10 && min_eig >= -1e-8 && parity <= 1e-6; }
    std::string str() const {
        return "trace " + short_num(trace, 2) + ", herm " + short_num(herm, 2) + ", min eig " +
               short_num(min_eig, 2) + ", parity drift " + short_num(parity, 2) + " over " +
               std::to_string(snapshots) + " snapshots";
    }
};

Conservation g_conservation;  // trajectories of criteria 4-6

struct Trajectory {
    std::vector<double> times, fidelity, parity, re_a, im_a, trace;
    Conservation cons;
};

// Integrates and records observables plus conservation diagnostics; the
// minimum eigenvalue is checked on every `eig_every`-th snapshot and the last.
Trajectory run_master(const Generator& gen, const PureState& psi, const std::vector<double>& times,
                      const MasterOptions& mo, std::size_t eig_every) {
    Trajectory tr;
    const AmplitudeObservable amp(gen.basis());
    double p0 = 0.0;
    integrate_master(gen, to_density(psi), times, mo, [&](std::size_t i, double t, const Eigen::MatrixXcd& y) {
        const DensityMatrix rho{gen.basis(), y};
        const double p = parity_expectation(rho);
        if (i == 0) {
            p0 = p;
        }
        const cplx a = amp(y);
        const double tr_re = std::real(trace(rho));
        tr.times.push_back(t);
        tr.fidelity.push_back(fidelity_to(rho, psi));
        tr.parity.push_back(p);
        tr.re_a.push_back(a.real());
        tr.im_a.push_back(a.imag());
        tr.trace.push_back(tr_re);
        tr.cons.trace = std::max(tr.cons.trace, std::abs(trace(rho) - 1.0));
        tr.cons.herm = std::max(tr.cons.herm, hermiticity_error(rho));
        tr.cons.parity = std::max(tr.cons.parity, std::abs(p - p0));
        if (i % eig_every == 0 || i + 1 == times.size()) {
            tr.cons.min_eig = std::min(tr.cons.min_eig, min_eigenvalue(rho));
        }
        ++tr.cons.snapshots;
        return true;
    });
    return tr;
}

std::string trajectory_rows(const Trajectory& tr) {
    std::string s;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        s += fmt(tr.times[i]) + "," + fmt(tr.fidelity[i]) + "," + fmt(tr.trace[i]) + "," + fmt(tr.parity[i]) +
             "," + fmt(tr.re_a[i]) + "," + fmt(tr.im_a[i]) + ";";
    }
    return s;
}

EnsembleParams ens(int n, double eta, double gamma2 = 1.0) {
    EnsembleParams p;
    p.n_spins = n;
    p.eta = eta;
    p.gamma2 = gamma2;
    return p;
}

StateSpec cat_spec(bool even, double theta, double phi) {
    StateSpec s;
    s.kind = even ? StateSpec::Kind::cat_even : StateSpec::Kind::cat_odd;
    s.css = {theta, phi};
    return s;
}

// theta with |alpha| = sqrt(N) tan(theta/2) = sqrt(2 eta / Gamma2), branch phase -pi/4
double cat_theta(int n, double eta) { return 2.0 * std::atan(std::sqrt(2.0 * eta / n)); }

// ---------------------------------------------------------------- 1-3: free dephasing

const int kFreeN = 200;
const TimeGrid kFreeGrid{0.0, 4.0, 50};
const SeedSpec kFreeSeeds{1, 10000};

Rows mc_rows(const MonteCarloResult& mc, const std::string& tag) {
    Rows r;
    r[tag + ".mean"] = join(mc.mean.values);
    r[tag + ".stderr"] = join(mc.std_error);
    r[tag + ".variance"] = join(mc.variance);
    r[tag + ".variance_stderr"] = join(mc.variance_std_error);
    return r;
}

Outcome crit1() {
    const double th = 1.0 / std::sqrt(200.0);
    const auto mc = monte_carlo_free_dephasing(FreeState::css, {th, 0.0}, Gaussian{1.0}, kFreeN, kFreeGrid,
                                               kFreeSeeds, 10);
    double worst = 0.0;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < mc.mean.times.size(); ++k) {
        const double ref = mean_fidelity_css(th, 1.0, kFreeN, mc.mean.times[k]);
        const double diff = std::abs(mc.mean.values[k] - ref);
        const double se = mc.std_error[k];
        if (diff > 3.0 * se + 1e-12) {
            ++bad;
        }
        if (diff > 1e-12) {
            worst = std::max(worst, diff / se);
        }
    }
    Outcome o;
    o.pass = bad == 0;
    o.detail = "css MC mean vs closed form: max |diff|/SE = " + short_num(worst, 3) + ", " +
               std::to_string(bad) + "/50 points beyond 3 SE (10^4 realizations)";
    o.data = mc_rows(mc, "css");
    return o;
}

Outcome crit2() {
    const double th = 1.0 / std::sqrt(200.0);
    const double nth2 = kFreeN * th * th;
    const double target = (nth2 / 4.0) * (nth2 / 4.0);
    const double inf_even = 1.0 - mean_fidelity_cat(th, 1.0, kFreeN, CatParity::even, INFINITY);
    const double rel = std::abs(inf_even - target) / target;

    const auto even = monte_carlo_free_dephasing(FreeState::cat_even, {th, 0.0}, Gaussian{1.0}, kFreeN, kFreeGrid,
                                                 kFreeSeeds, 10);
    const auto odd = monte_carlo_free_dephasing(FreeState::cat_odd, {th, 0.0}, Gaussian{1.0}, kFreeN, kFreeGrid,
                                                kFreeSeeds, 10);
    double worst = 0.0, worst_eq13 = 0.0;
    std::size_t bad = 0, checked = 0;
    for (std::size_t k = 0; k < odd.mean.times.size(); ++k) {
        const double t = odd.mean.times[k];
        if (t > 2.0) {
            continue;
        }
        ++checked;
        const double diff = std::abs(odd.mean.values[k] - std::exp(-t * t));
        const double se = odd.std_error[k];
        if (diff > 3.0 * se + 1e-12) {
            ++bad;
        }
        const double diff13 = std::abs(odd.mean.values[k] - mean_fidelity_cat(th, 1.0, kFreeN, CatParity::odd, t));
        if (diff > 1e-12) {
            worst = std::max(worst, diff / se);
        }
        if (diff13 > 1e-12) {
            worst_eq13 = std::max(worst_eq13, diff13 / se);
        }
    }
    Outcome o;
    o.pass = rel <= 0.1 && bad == 0;
    o.detail = "even saturated infidelity " + short_num(inf_even) + " vs (N th^2/4)^2 = " + short_num(target) +
               " (rel " + short_num(rel, 3) + "); odd MC vs exp(-d^2 t^2): max |diff|/SE = " + short_num(worst, 3) +
               ", " + std::to_string(bad) + "/" + std::to_string(checked) +
               " points beyond 3 SE [vs exact average: max " + short_num(worst_eq13, 3) + " SE]";
    o.data = mc_rows(even, "even");
    const Rows r = mc_rows(odd, "odd");
    o.data.insert(r.begin(), r.end());
    return o;
}

Outcome crit3() {
    // N th^2 = 0.2
    const double th = std::sqrt(0.2 / kFreeN);
    const auto mc = monte_carlo_free_dephasing(FreeState::css, {th, 0.0}, Gaussian{1.0}, kFreeN, kFreeGrid,
                                               kFreeSeeds, 0);
    double worst = 0.0, worst_exact = 0.0;
    std::size_t bad = 0, bad_exact = 0;
    for (std::size_t k = 0; k < mc.mean.times.size(); ++k) {
        const double t = mc.mean.times[k];
        const double se = mc.variance_std_error[k];
        const double diff = std::abs(mc.variance[k] - var_fidelity_css(th, 1.0, kFreeN, t));
        const double diff_exact = std::abs(mc.variance[k] - var_fidelity_css_exact(th, 1.0, kFreeN, t));
        bad += diff > 3.0 * se + 1e-15;
        bad_exact += diff_exact > 3.0 * se + 1e-15;
        if (diff > 1e-15) {
            worst = std::max(worst, diff / se);
        }
        if (diff_exact > 1e-15) {
            worst_exact = std::max(worst_exact, diff_exact / se);
        }
    }
    Outcome o;
    o.pass = bad == 0;
    o.detail = "MC variance vs (N th^4/8)(1 - e^{-d^2 t^2}) at N th^2 = 0.2: max |diff|/SE = " + short_num(worst, 3) +
               ", " + std::to_string(bad) + "/50 points beyond 3 SE [vs exact variance: max " +
               short_num(worst_exact, 3) + " SE, " + std::to_string(bad_exact) + " beyond]";
    o.data = mc_rows(mc, "css_small");
    return o;
}

// ---------------------------------------------------------------- 4-7: Lindblad

Outcome crit4() {
    const int n = 8;
    const double eta = 0.2;
    const Generator g = Generator::collective(ens(n, eta));
    std::vector<double> times;
    for (int i = 0; i <= 200; ++i) {
        times.push_back(10.0 * i);
    }
    double f[2] = {0, 0};
    Outcome o;
    for (int k = 0; k < 2; ++k) {
        const PureState psi = prepare_pure(cat_spec(k == 0, cat_theta(n, eta), -std::numbers::pi / 4), g.basis());
        const Trajectory tr = run_master(g, psi, times, MasterOptions{}, 20);
        f[k] = tr.fidelity.back();
        g_conservation.merge(tr.cons);
        o.data[k == 0 ? "even" : "odd"] = trajectory_rows(tr);
    }
    o.pass = std::abs(f[0] - 0.998) <= 0.002 && std::abs(f[1] - 0.995) <= 0.002;
    o.detail = "steady fidelity at t = 2000: even " + short_num(f[0], 6) + " (0.998 +- 0.002), odd " +
               short_num(f[1], 6) + " (0.995 +- 0.002)";
    return o;
}

const int kFig2Realizations = 10;
const std::uint64_t kFig2Seed = 1;

// Rows "even.r" / "odd.r" for the requested realization indices.
Rows fig2_rows(const std::vector<std::size_t>& which, Conservation* cons, double* mean_even, double* mean_odd) {
    const int n = 8;
    const double eta = 0.2;
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) {
        times.push_back(10.0 * i);
    }
    const std::size_t nw = which.size();
    std::vector<Trajectory> out(2 * nw);
    for_each_index(2 * nw, Execution::parallel, [&](std::size_t job) {
        const std::size_t r = which[job / 2];
        const bool even = job % 2 == 0;
        const auto d = sample_detunings(Gaussian{1e-2}, n, derive_seed(kFig2Seed, r));
        const Generator g = Generator::full(ens(n, eta), d);
        const PureState psi = prepare_pure(cat_spec(even, cat_theta(n, eta), -std::numbers::pi / 4), g.basis());
        out[job] = run_master(g, psi, times, MasterOptions{}, 5);
    });
    Rows rows;
    double se = 0.0, so = 0.0;
    for (std::size_t j = 0; j < 2 * nw; ++j) {
        const std::size_t r = which[j / 2];
        const bool even = j % 2 == 0;
        rows[(even ? "even." : "odd.") + std::to_string(r)] = trajectory_rows(out[j]);
        (even ? se : so) += out[j].fidelity.back();
        if (cons != nullptr) {
            cons->merge(out[j].cons);
        }
    }
    if (mean_even != nullptr) {
        *mean_even = se / static_cast<double>(nw);
        *mean_odd = so / static_cast<double>(nw);
    }
    return rows;
}

Outcome crit5() {
    std::vector<std::size_t> all(kFig2Realizations);
    for (std::size_t r = 0; r < all.size(); ++r) {
        all[r] = r;
    }
    double fe = 0.0, fo = 0.0;
    Outcome o;
    o.data = fig2_rows(all, &g_conservation, &fe, &fo);
    o.pass = fe >= 0.64 && fe <= 0.84 && fo >= 0.02 && fo <= 0.20;
    o.detail = "N = 8, d = 1e-2, 10 realizations (master seed 1): mean fidelity at t = 200 even " + short_num(fe) +
               " [0.64, 0.84], odd " + short_num(fo) + " [0.02, 0.20]";
    return o;
}

Outcome crit6() {
    Outcome o;
    // free evolution against the closed-form per-realization overlap
    MasterOptions tight;
    tight.atol = 1e-12;
    tight.rtol = 1e-12;
    double worst_free = 0.0;
    std::vector<double> times;
    for (int i = 0; i <= 10; ++i) {
        times.push_back(0.5 * i);
    }
    for (std::uint64_t r = 0; r < 3; ++r) {
        const auto d = sample_detunings(Gaussian{1.0}, 8, derive_seed(2, r));
        const Generator g = Generator::full(ens(8, 0.0, 0.0), d);
        for (bool even : {true, false}) {
            const SpinCoherentParams css{0.3, 0.2};
            const PureState psi = prepare_pure(cat_spec(even, css.theta, css.phi), g.basis());
            const Trajectory tr = run_master(g, psi, times, tight, 5);
            g_conservation.merge(tr.cons);
            for (std::size_t i = 0; i < times.size(); ++i) {
                const double ref = overlap_cat_exact(css, even ? CatParity::even : CatParity::odd, d, times[i]);
                worst_free = std::max(worst_free, std::abs(tr.fidelity[i] - ref));
            }
            o.data["free." + std::to_string(r) + (even ? ".even" : ".odd")] = trajectory_rows(tr);
        }
    }
    // collective vs full basis
    MasterOptions mo;
    mo.atol = 1e-11;
    mo.rtol = 1e-10;
    double worst_backend = 0.0;
    std::vector<double> t2;
    for (int i = 0; i <= 25; ++i) {
        t2.push_back(2.0 * i);
    }
    for (int n = 2; n <= 6; ++n) {
        const EnsembleParams p = ens(n, 0.2);
        const Generator gf = Generator::full(p, std::vector<double>(static_cast<std::size_t>(n), 0.0));
        const Generator gc = Generator::collective(p);
        for (int kind = 0; kind < 3; ++kind) {
            StateSpec s = cat_spec(kind == 0, cat_theta(n, 0.2), -std::numbers::pi / 4);
            if (kind == 2) {
                s.kind = StateSpec::Kind::css;
            }
            const Trajectory a = run_master(gf, prepare_pure(s, gf.basis()), t2, mo, 5);
            const Trajectory b = run_master(gc, prepare_pure(s, gc.basis()), t2, mo, 5);
            g_conservation.merge(a.cons);
            g_conservation.merge(b.cons);
            for (std::size_t i = 0; i < t2.size(); ++i) {
                worst_backend = std::max({worst_backend, std::abs(a.fidelity[i] - b.fidelity[i]),
                                          std::abs(a.re_a[i] - b.re_a[i]), std::abs(a.im_a[i] - b.im_a[i])});
            }
            const std::string key = "backend." + std::to_string(n) + "." + std::to_string(kind);
            o.data[key + ".full"] = trajectory_rows(a);
            o.data[key + ".collective"] = trajectory_rows(b);
        }
    }
    o.pass = worst_free <= 1e-9 && worst_backend <= 1e-7;
    o.detail = "free evolution vs overlap_cat_exact: max diff " + short_num(worst_free, 3) +
               " (1e-9); collective vs full, N = 2..6: max diff " + short_num(worst_backend, 3) + " (1e-7)";
    return o;
}

Outcome crit7() {
    Outcome o;
    o.pass = g_conservation.ok() && g_conservation.snapshots > 0;
    o.detail = "criteria 4-6 trajectories: " + g_conservation.str();
    return o;
}

// ---------------------------------------------------------------- 8-9: HP amplitude and Wigner

const int kHpN = 100;

std::vector<double> hp_grid() {
    std::vector<double> g{0.25, 0.5, 1.0};
    for (int i = 0; i <= 16; ++i) {
        g.push_back(6.0 + 0.5 * i);
    }
    return g;
}

SteadyOptions hp_options() {
    SteadyOptions o;
    o.t_max = 400.0;
    return o;
}

Rows hp_rows(const std::vector<AmplitudePoint>& pts) {
    Rows r;
    for (const auto& p : pts) {
        r["eta." + fmt(p.eta)] = fmt(p.amplitude) + "," + fmt(p.mean_a.real()) + "," + fmt(p.mean_a.imag()) + "," +
                                 fmt(p.t_final) + "," + (p.converged ? "1" : "0");
    }
    return r;
}

Outcome crit8() {
    const auto grid = hp_grid();
    const auto pts = steady_amplitude_sweep(kHpN, grid, hp_options(), Execution::parallel);
    Outcome o;
    o.data = hp_rows(pts);
    double worst_low = 0.0;
    std::size_t unconverged = 0;
    for (const auto& p : pts) {
        unconverged += !p.converged;
        if (p.eta <= 1.0) {
            worst_low = std::max(worst_low, std::abs(p.amplitude - std::sqrt(2.0 * p.eta)) / std::sqrt(2.0 * p.eta));
        }
    }
    // maximum over [6, 14], then the first point at or below half of it
    std::size_t imax = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].eta >= 6.0 && (pts[imax].eta < 6.0 || pts[i].amplitude > pts[imax].amplitude)) {
            imax = i;
        }
    }
    double drop_at = NAN;
    for (std::size_t i = imax + 1; i < pts.size(); ++i) {
        if (pts[i].amplitude <= 0.5 * pts[imax].amplitude) {
            drop_at = pts[i].eta;
            break;
        }
    }
    const bool drop_ok = !std::isnan(drop_at) && drop_at >= 8.0 && drop_at <= 12.0;
    std::string curve;
    for (const auto& p : pts) {
        curve += " " + short_num(p.eta, 3) + ":" + short_num(p.amplitude, 3) + (p.converged ? "" : "*");
    }
    o.pass = worst_low <= 0.05 && drop_ok;
    o.detail = "eta <= 1: max rel. deviation from sqrt(2 eta) " + short_num(worst_low, 3) + " (0.05); maximum " +
               short_num(pts[imax].amplitude, 4) + " at eta " + short_num(pts[imax].eta, 3) +
               ", first >= 50% drop at eta " + short_num(drop_at, 3) + " ([8, 12]); " + std::to_string(unconverged) +
               " points unconverged at t_max = 400 (*):" + curve;
    return o;
}

struct Blob {
    double re, im, w;
};

// Strict local maxima over the 8 neighbours with W >= 0.2 max W, sorted by W.
std::vector<Blob> blobs(const WignerGrid& g) {
    std::vector<Blob> out;
    const double top = g.values.maxCoeff();
    const auto ni = g.values.rows(), nr = g.values.cols();
    for (Eigen::Index i = 1; i + 1 < ni; ++i) {
        for (Eigen::Index j = 1; j + 1 < nr; ++j) {
            const double w = g.values(i, j);
            if (w < 0.2 * top) {
                continue;
            }
            bool peak = true;
            for (int di = -1; di <= 1 && peak; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((di != 0 || dj != 0) && g.values(i + di, j + dj) >= w) {
                        peak = false;
                        break;
                    }
                }
            }
            if (peak) {
                out.push_back({g.re_axis[static_cast<std::size_t>(j)], g.im_axis[static_cast<std::size_t>(i)], w});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Blob& a, const Blob& b) { return a.w > b.w; });
    return out;
}

Rows wigner_rows(double eta, Blob* first, std::vector<Blob>* all, AmplitudePoint* ap, bool* flagged) {
    DensityMatrix rho;
    *ap = steady_amplitude(kHpN, eta, hp_options(), &rho);
    const double r = std::sqrt(2.0 * eta) + 3.0;
    std::vector<double> axis;
    for (int i = 0; i <= 120; ++i) {
        axis.push_back(-r + 2.0 * r * i / 120.0);
    }
    const WignerGrid g = wigner(rho, axis, axis, Execution::parallel);
    *all = blobs(g);
    *flagged = g.window_exceeds_truncation;
    if (!all->empty()) {
        *first = all->front();
    }
    Rows rows;
    for (std::size_t i = 0; i < axis.size(); ++i) {
        std::vector<double> line;
        for (std::size_t j = 0; j < axis.size(); ++j) {
            line.push_back(g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        rows["eta." + fmt(eta) + ".row." + std::to_string(1000 + i)] = join(line);
    }
    return rows;
}

Outcome crit9() {
    Outcome o;
    Blob b5{}, b12{};
    std::vector<Blob> all5, all12;
    AmplitudePoint a5, a12;
    bool f5 = false, f12 = false;
    o.data = wigner_rows(5.0, &b5, &all5, &a5, &f5);
    const Rows r12 = wigner_rows(12.0, &b12, &all12, &a12, &f12);
    o.data.insert(r12.begin(), r12.end());
    const bool one = all5.size() == 1;
    double dphi = NAN;
    if (all12.size() >= 2) {
        dphi = std::abs(std::remainder(std::atan2(all12[0].im, all12[0].re) - std::atan2(all12[1].im, all12[1].re),
                                       2.0 * std::numbers::pi));
    }
    const bool two = all12.size() >= 2 && std::abs(dphi - std::numbers::pi) <= 0.3;
    o.pass = one && two;
    auto list = [](const std::vector<Blob>& v) {
        std::string s;
        for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 4); ++i) {
            const Blob& b = v[i];
            s += " (" + short_num(b.re, 3) + "," + short_num(b.im, 3) + ";" + short_num(b.w, 3) + ")";
        }
        return s;
    };
    o.detail = "eta 5: " + std::to_string(all5.size()) + " blob(s)" + list(all5) + "; eta 12: " +
               std::to_string(all12.size()) + " blob(s)" + list(all12) + ", phase difference " + short_num(dphi, 4) +
               " (pi +- 0.3)" + (a12.converged ? "" : "; eta 12 state unconverged at t_max") +
               (f12 ? "; eta 12 window exceeds |beta|^2 = N/2" : "");
    return o;
}

// ---------------------------------------------------------------- 10-13: mean field

OdeOptions tight_ode() {
    OdeOptions o;
    o.atol = 1e-13;
    o.rtol = 1e-12;
    return o;
}

Outcome crit10() {
    const int n = 100;
    Outcome o;
    double worst_a2 = 0.0, worst_z = 0.0, worst_phi = 0.0;
    std::string detail;
    for (double eta : {0.5, 2.0, 6.0}) {
        const EnsembleParams p = ens(n, eta);
        const ReducedState start{std::sqrt(eta / n), std::numbers::pi / 4 + 0.2, -0.8};
        const auto traj = integrate_reduced(ReducedModel::symmetric, p, 0.0, start, {0.0, 2000.0, 4000.0}, tight_ode());
        const ReducedState end = traj.back();
        const ReducedState cf = symmetric_steady_state(n, eta);
        const double da2 = std::abs(end.amplitude * end.amplitude - cf.amplitude * cf.amplitude);
        const double dz = std::abs(end.inversion - cf.inversion);
        const double dphi = std::abs(end.phase - std::numbers::pi / 4);
        worst_a2 = std::max(worst_a2, da2);
        worst_z = std::max(worst_z, dz);
        worst_phi = std::max(worst_phi, dphi);
        const double settle = std::abs(traj[2].amplitude - traj[1].amplitude) + std::abs(traj[2].inversion - traj[1].inversion);
        detail += " eta " + short_num(eta) + ": dA^2 " + short_num(da2, 3) + ", dz " + short_num(dz, 3) +
                  ", dphi " + short_num(dphi, 3) + " (settled to " + short_num(settle, 2) + ");";
        o.data["sync." + fmt(eta)] = fmt(end.amplitude) + "," + fmt(end.phase) + "," + fmt(end.inversion);
    }
    // above eta/N = 1/16: the amplitude must collapse
    std::string above;
    bool none_sync = true;
    for (double eta : {6.4, 7.0, 8.0, 10.0}) {
        const EnsembleParams p = ens(n, eta);
        const ReducedState start{std::sqrt(eta / n), std::numbers::pi / 4, -0.5};
        const ReducedState end =
            integrate_reduced(ReducedModel::symmetric, p, 0.0, start, {0.0, 4000.0}, tight_ode()).back();
        const bool synced = end.amplitude > 0.1 * std::sqrt(2.0 * eta / n);
        none_sync = none_sync && !synced;
        above += " " + short_num(eta) + (synced ? ":A=" + short_num(end.amplitude, 3) : ":collapsed");
        o.data["above." + fmt(eta)] = fmt(end.amplitude) + "," + fmt(end.phase) + "," + fmt(end.inversion);
    }
    o.pass = worst_a2 <= 1e-6 && worst_z <= 1e-6 && worst_phi <= 1e-6 && none_sync;
    o.detail = "integrated symmetric model vs closed form (1e-6):" + detail + " eta/N > 1/16:" + above;
    return o;
}

Outcome crit11() {
    const int n = 10000;
    const double eta = 300.0;
    const EnsembleParams p = ens(n, eta);
    const ReducedState start = symmetric_steady_state(n, eta);
    ReducedState ss[2];
    const double deltas[2] = {1e-7, 1e-6};
    Outcome o;
    double residual = 0.0;
    for (int k = 0; k < 2; ++k) {
        ss[k] = integrate_reduced(ReducedModel::two_ensemble, p, deltas[k], {start.amplitude, 0.0, start.inversion},
                                  {0.0, 2000.0}, tight_ode())
                    .back();
        residual = std::max(residual, mf_rhs_two_ensemble(ss[k].vec(), p, deltas[k]).cwiseAbs().maxCoeff());
        o.data["delta." + fmt(deltas[k])] = fmt(ss[k].amplitude) + "," + fmt(ss[k].phase) + "," + fmt(ss[k].inversion);
    }
    const double slope_cf = two_ensemble_steady_state_small_delta(n, eta, 1.0).phase;
    const double s0 = ss[0].phase / deltas[0], s1 = ss[1].phase / deltas[1];
    const double lin = std::abs(s1 - s0) / s0;
    const double rel0 = std::abs(s0 - slope_cf) / slope_cf, rel1 = std::abs(s1 - slope_cf) / slope_cf;
    const double a2_0 = ss[0].amplitude * ss[0].amplitude, a2_1 = ss[1].amplitude * ss[1].amplitude;
    const double da2 = std::abs(a2_1 - a2_0) / a2_0;
    const double dz = std::abs(ss[1].inversion - ss[0].inversion) / std::abs(ss[0].inversion);
    o.pass = std::max(rel0, rel1) <= 0.05 && lin <= 0.05 && da2 < 0.01 && dz < 0.01;
    o.detail = "zeta/delta = " + short_num(s0, 6) + ", " + short_num(s1, 6) + " vs closed-form slope " +
               short_num(slope_cf, 6) + " (rel " + short_num(std::max(rel0, rel1), 3) + ", linearity " +
               short_num(lin, 2) + "); relative shifts A^2 " + short_num(da2, 2) + ", z " + short_num(dz, 2) +
               "; steady residual " + short_num(residual, 2);
    return o;
}

struct SweepResult {
    EllipseFit fit;
    Rows rows;
    std::size_t unconverged = 0;
};

SweepResult phase_sweep(int n) {
    const double nn = n;
    std::vector<double> etas, deltas;
    for (int i = 0; i < 20; ++i) {
        etas.push_back(nn * (0.0125 + 0.0025 * i));
    }
    for (int j = 0; j <= 8; ++j) {
        deltas.push_back(nn * nn * 0.01 * j);
    }
    SyncOptions so;
    auto pts = sync_phase_sweep(n, etas, deltas, so, Execution::parallel);
    std::vector<SyncPhasePoint> refined;
    const auto boundary = refine_boundary(n, pts, 8, so, &refined, Execution::parallel);
    pts.insert(pts.end(), refined.begin(), refined.end());
    SweepResult r;
    r.fit = fit_ellipse(pts, n);
    for (const auto& p : pts) {
        r.unconverged += p.status == SyncStatus::unconverged;
        r.rows["n" + std::to_string(n) + "." + fmt(p.eta_tilde) + "." + fmt(p.delta_tilde)] =
            fmt(p.zeta_ss.value_or(NAN)) + "," + to_string(p.status);
    }
    r.rows["n" + std::to_string(n) + ".fit"] = fmt(r.fit.a) + "," + fmt(r.fit.b) + "," + fmt(r.fit.residual);
    return r;
}

Outcome crit12() {
    const SweepResult big = phase_sweep(10000);
    const SweepResult small = phase_sweep(1000);
    const EllipseFit& f = big.fit;
    const double ea = std::abs(f.a - 0.03125) / 0.03125;
    const double eb = std::abs(f.b - 2.2077) / 2.2077;
    const double eeta = std::abs(f.eta_c - 10000.0 / 16.0) / (10000.0 / 16.0);
    const double edc = std::abs(f.delta_c - 0.06888) / 0.06888;
    const double en = std::abs(small.fit.delta_c - f.delta_c) / f.delta_c;
    Outcome o;
    o.pass = ea <= 0.05 && eb <= 0.05 && eeta <= 0.05 && edc <= 0.1 && en <= 0.1;
    o.detail = "N = 10^4: a " + short_num(f.a, 5) + " (" + short_num(100 * ea, 2) + "%), b " + short_num(f.b, 5) +
               " (" + short_num(100 * eb, 2) + "%), eta_c " + short_num(f.eta_c, 5) + " (" + short_num(100 * eeta, 2) +
               "%), delta_c " + short_num(f.delta_c, 4) + " (" + short_num(100 * edc, 2) + "%); N = 10^3: delta_c " +
               short_num(small.fit.delta_c, 4) + " (" + short_num(100 * en, 2) + "% from N = 10^4); unconverged " +
               std::to_string(big.unconverged + small.unconverged);
    o.data = big.rows;
    o.data.insert(small.rows.begin(), small.rows.end());
    return o;
}

Outcome crit13() {
    const int n = 1000;
    const double eta = 30.0, delta = 0.02;
    const EnsembleParams p = ens(n, eta);
    const ReducedState s0 = symmetric_steady_state(n, eta);
    const ReducedState start{s0.amplitude, 0.0, s0.inversion};
    std::vector<double> times;
    for (int i = 0; i <= 100; ++i) {
        times.push_back(1.0 * i);
    }
    OdeOptions opt;
    opt.atol = 1e-12;
    opt.rtol = 1e-10;
    const auto red = integrate_reduced(ReducedModel::two_ensemble, p, delta, start, times, opt);
    const auto printed = integrate_reduced(ReducedModel::two_ensemble_printed, p, delta, start, times, opt);
    double worst = 0.0, worst_printed = 0.0;
    Outcome o;
    std::string rows;
    integrate_full(p, sample_detunings(TwoGroup{delta}, n, 0), two_group_state(n, start), times, opt,
                   Execution::parallel, [&](std::size_t i, double, const Eigen::VectorXd& y) {
                       const ReducedState r = two_group_projection(unpack(y));
                       worst = std::max({worst, std::abs(r.amplitude - red[i].amplitude),
                                         std::abs(r.phase - red[i].phase), std::abs(r.inversion - red[i].inversion)});
                       worst_printed = std::max({worst_printed, std::abs(r.amplitude - printed[i].amplitude),
                                                 std::abs(r.phase - printed[i].phase),
                                                 std::abs(r.inversion - printed[i].inversion)});
                       rows += fmt(r.amplitude) + "," + fmt(r.phase) + "," + fmt(r.inversion) + ";";
                       return true;
                   });
    o.data["full"] = rows;
    // O(N) vs O(N^2) right-hand side at N = 10
    MeanFieldState s;
    NormalSampler g(5);
    for (int i = 0; i < 10; ++i) {
        const double z = std::tanh(g());
        s.coherences.push_back(std::polar(0.5 * std::sqrt(1 - z * z) * std::abs(std::tanh(g())), g()));
        s.inversions.push_back(z);
    }
    const auto d = sample_detunings(Gaussian{0.3}, 10, 6);
    const EnsembleParams p10 = ens(10, 0.7);
    const MeanFieldState a = mf_rhs_full(s, p10, d);
    const MeanFieldState b = mf_rhs_full_reference(s, p10, d);
    double rhs = 0.0;
    for (int i = 0; i < 10; ++i) {
        rhs = std::max({rhs, std::abs(a.coherences[i] - b.coherences[i]), std::abs(a.inversions[i] - b.inversions[i])});
    }
    o.pass = worst <= 1e-5 && rhs <= 1e-12;
    o.detail = "full model (N = 10^3, two groups, d = 0.02) vs reduced over [0, 100]: max diff " + short_num(worst, 3) +
               " (1e-5) [printed three-equation form: " + short_num(worst_printed, 3) + "]; O(N) vs O(N^2) rhs at N = 10: " + short_num(rhs, 3) + " (1e-12)";
    return o;
}

// ---------------------------------------------------------------- driver

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
    std::function<Rows()> recheck;  // worker-count-1 recomputation (possibly partial)
};

void write_rows(const fs::path& path, const Rows& rows) {
    std::ofstream f(path);
    for (const auto& [k, v] : rows) {
        f << k << "," << v << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(out);

    std::vector<Criterion> crits{
        {1, "free-dephasing mean", 60, crit1, [] { return crit1().data; }},
        {2, "parity sensitivity", 120, crit2, [] { return crit2().data; }},
        {3, "fidelity variance", 120, crit3, [] { return crit3().data; }},
        {4, "Lindblad steady fidelities", 600, crit4, [] { return crit4().data; }},
        {5, "dissipative parity-sensitive decay", 1800, crit5,
         [] { return fig2_rows({0, 7}, nullptr, nullptr, nullptr); }},
        {6, "oracle equivalence", 300, crit6, [] { return crit6().data; }},
        {7, "conservation suite", 1e9, crit7, nullptr},
        {8, "HP amplitude curve", 3600, crit8,
         [] { return hp_rows(steady_amplitude_sweep(kHpN, {1.0, 9.0, 12.0}, hp_options(), Execution::parallel)); }},
        {9, "Wigner bimodality", 600, crit9, [] { return crit9().data; }},
        {10, "mean-field steady state", 60, crit10, [] { return crit10().data; }},
        {11, "two-ensemble linear response", 120, crit11, [] { return crit11().data; }},
        {12, "synchronization boundary ellipse", 3600, crit12, [] { return crit12().data; }},
        {13, "reduction fidelity", 300, crit13, [] { return crit13().data; }},
    };

    // optional comma-separated subset of criterion ids, for development runs
    if (argc > 2) {
        std::vector<int> keep;
        std::stringstream ss(argv[2]);
        for (std::string tok; std::getline(ss, tok, ',');) {
            keep.push_back(std::stoi(tok));
        }
        std::erase_if(crits, [&](const Criterion& c) { return std::find(keep.begin(), keep.end(), c.id) == keep.end(); });
    }

    set_worker_count(4);
    std::map<int, Rows> first;
    std::vector<std::string> lines;
    bool all = true;
    auto report = [&](int id, const std::string& name, bool pass, const std::string& detail, double secs) {
        std::ostringstream os;
        os << (pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << detail << " ["
           << short_num(secs, 3) << " s]";
        std::cout << os.str() << std::endl;
        lines.push_back(os.str());
        all = all && pass;
    };

    for (const auto& c : crits) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        if (!in_time) {
            o.detail += "; runtime over the " + short_num(c.budget_s) + " s budget";
        }
        first[c.id] = o.data;
        write_rows(out / ("criterion" + std::to_string(c.id) + ".csv"), o.data);
        report(c.id, c.name, o.pass && in_time, o.detail, secs);
    }

    // determinism: recompute at one worker and compare byte for byte
    const auto t0 = Clock::now();
    set_worker_count(1);
    std::size_t compared = 0, mismatched = 0;
    std::string where;
    for (const auto& c : crits) {
        if (!c.recheck) {
            continue;
        }
        Rows again;
        try {
            again = c.recheck();
        } catch (const std::exception& e) {
            ++mismatched;
            where += " " + std::to_string(c.id) + "(error)";
            continue;
        }
        for (const auto& [k, v] : again) {
            ++compared;
            const auto it = first[c.id].find(k);
            if (it == first[c.id].end() || it->second != v) {
                ++mismatched;
                where += " " + std::to_string(c.id) + ":" + k;
            }
        }
        // a criterion rerun in full must also reproduce every row
        if (c.id != 5 && c.id != 8 && again.size() != first[c.id].size()) {
            ++mismatched;
            where += " " + std::to_string(c.id) + "(row count)";
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report(14, "determinism", mismatched == 0 && compared > 0,
           "workers 4 vs 1: " + std::to_string(compared) + " data rows compared byte for byte, " +
               std::to_string(mismatched) + " mismatched" + where +
               " (criteria 5 and 8 recomputed for realizations {0, 7} and eta {1, 9, 12})",
           secs);

    std::ofstream summary(out / "summary.txt");
    for (const auto& l : lines) {
        summary << l << "\n";
    }
    return all ? 0 : 1;
}
