// Adaptive Dormand-Prince 5(4) integrator with Hairer's 4th-order dense output.
// Works on any Eigen dense type (real or complex, vector or matrix).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "spincat/core.hpp"
#include "spincat/parallel.hpp"

namespace spincat {

struct OdeOptions {
    double atol = 1e-9;
    double rtol = 1e-7;
    double h_initial = 0.0;  // 0: pick automatically
    double h_max = 0.0;      // 0: unbounded
    double h_min = 1e-14;    // relative to |t|+1; below this the integration aborts
    std::size_t max_steps = 100000000;
};

struct OdeStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_calls = 0;
};

template <class State>
class Dopri5 {
public:
    using Rhs = std::function<void(double, const State&, State&)>;

    Dopri5(Rhs rhs, OdeOptions opts = {}) : f_(std::move(rhs)), opt_(opts) {}

    /// Integrates from (t0, y0) and calls observe(i, times[i], y) for every
    /// output time in increasing order. Steps are not clamped to output times
    /// (those come from dense output) except the final one, which lands on
    /// times.back() exactly. observe returns false to stop early.
    /// Returns the state at the last time reached.
    template <class Observer>
    State solve(double t0, const State& y0, const std::vector<double>& times, Observer&& observe) {
        if (times.empty()) {
            return y0;
        }
        FlushDenormals ftz;
        stats_ = {};
        const double t_end = times.back();
        std::size_t next = 0;
        while (next < times.size() && times[next] <= t0) {
            if (!observe(next, times[next], y0)) {
                return y0;
            }
            ++next;
        }
        if (next == times.size()) {
            return y0;
        }

        State y = y0;
        double t = t0;
        k1_ = State::Zero(y.rows(), y.cols());
        call(t, y, k1_);
        double h = opt_.h_initial > 0.0 ? opt_.h_initial : initial_step(t, y);
        double err_old = 1e-4;
        bool last_rejected = false;

        while (next < times.size()) {
            if (stats_.accepted + stats_.rejected >= opt_.max_steps) {
                throw NumericalError("ode: step budget exhausted at t=" + fmt(t));
            }
            if (opt_.h_max > 0.0) {
                h = std::min(h, opt_.h_max);
            }
            const bool final_step = t + h >= t_end;
            if (final_step) {
                h = t_end - t;
            }
            if (h < opt_.h_min * (std::abs(t) + 1.0)) {
                throw NumericalError("ode: step size underflow (h=" + fmt(h) + ") at t=" + fmt(t));
            }

            const double err = attempt(t, y, h);
            if (!std::isfinite(err)) {
                throw NumericalError("ode: non-finite state at t=" + fmt(t));
            }
            if (err <= 1.0) {
                // PI step-size controller (Hairer's beta = 0.04)
                double fac = 0.9 * std::pow(err, -0.17) * std::pow(err_old, 0.04);
                fac = std::clamp(fac, 0.2, 10.0);
                if (last_rejected) {
                    fac = std::min(fac, 1.0);
                }
                err_old = std::max(err, 1e-4);
                ++stats_.accepted;
                const double t_new = final_step ? t_end : t + h;
                while (next < times.size() && times[next] <= t_new) {
                    if (next + 1 == times.size() && final_step) {
                        if (!observe(next, times[next], y_new_)) {
                            return y_new_;
                        }
                    } else {
                        const State yi = dense(t, h, times[next], y);
                        if (!observe(next, times[next], yi)) {
                            return yi;
                        }
                    }
                    ++next;
                }
                t = t_new;
                y.swap(y_new_);
                k1_.swap(k7_);
                h *= fac;
                last_rejected = false;
            } else {
                ++stats_.rejected;
                h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
                last_rejected = true;
            }
        }
        return y;
    }

    const OdeStats& stats() const { return stats_; }

private:
    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(6);
        os << v;
        return os.str();
    }

    void call(double t, const State& y, State& dy) {
        f_(t, y, dy);
        ++stats_.rhs_calls;
    }

    double error_norm(const State& e, const State& y0, const State& y1) const {
        const auto sc = (opt_.atol + opt_.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array());
        const double sum = (e.cwiseAbs().array() / sc).square().sum();
        return std::sqrt(sum / static_cast<double>(e.size()));
    }

    double initial_step(double t, const State& y) {
        const auto sc = (opt_.atol + opt_.rtol * y.cwiseAbs().array());
        const double d0 = std::sqrt((y.cwiseAbs().array() / sc).square().mean());
        const double d1 = std::sqrt((k1_.cwiseAbs().array() / sc).square().mean());
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        State y1 = y + h0 * k1_;
        State k2 = State::Zero(y.rows(), y.cols());
        call(t + h0, y1, k2);
        const double d2 = std::sqrt(((k2 - k1_).cwiseAbs().array() / sc).square().mean()) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                     : std::pow(0.01 / std::max(d1, d2), 0.2);
        return std::min(100.0 * h0, h1);
    }

    double attempt(double t, const State& y, double h) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                         a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                         a75 = -2187.0 / 6784, a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                         e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        const auto rows = y.rows();
        const auto cols = y.cols();
        if (k2_.rows() != rows || k2_.cols() != cols) {
            for (State* k : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y_new_}) {
                k->setZero(rows, cols);
            }
        }
        tmp_ = y + h * a21 * k1_;
        call(t + c2 * h, tmp_, k2_);
        tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        call(t + c3 * h, tmp_, k3_);
        tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        call(t + c4 * h, tmp_, k4_);
        tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        call(t + c5 * h, tmp_, k5_);
        tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        call(t + h, tmp_, k6_);
        y_new_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
        call(t + h, y_new_, k7_);
        tmp_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
        return error_norm(tmp_, y, y_new_);
    }

    // Hairer's contd5 interpolant over the step just attempted from (t, y).
    State dense(double t, double h, double t_out, const State& y) const {
        constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                         d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                         d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        const double s = (t_out - t) / h;
        const double s1 = 1.0 - s;
        const State r2 = y_new_ - y;
        const State r3 = h * k1_ - r2;
        const State r4 = r2 - h * k7_ - r3;
        const State r5 = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
        return y + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }

    Rhs f_;
    OdeOptions opt_;
    OdeStats stats_;
    State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_;
};

} // namespace spincat
