#include "spincat/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace spincat {

void EnsembleParams::validate() const {
    if (n_spins < 1) {
        throw ConfigError("n_spins must be >= 1, got " + std::to_string(n_spins));
    }
    if (!std::isfinite(eta)) {
        throw ConfigError("eta must be finite");
    }
    if (!std::isfinite(gamma2) || gamma2 < 0.0) {
        throw ConfigError("gamma2 must be finite and >= 0");
    }
    if (!std::isfinite(phase_phi)) {
        throw ConfigError("phase_phi must be finite");
    }
}

std::string describe(const DetuningModel& model) {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Identical>) {
                os << "identical(delta0=" << m.delta0 << ")";
            } else if constexpr (std::is_same_v<T, TwoGroup>) {
                os << "two_group(delta=" << m.delta << ")";
            } else {
                os << "gaussian(sigma=" << m.sigma << ")";
            }
        },
        model);
    return os.str();
}

double NormalSampler::operator()() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    constexpr double scale = 0x1.0p-53;
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
    const double u2 = static_cast<double>(engine_() >> 11) * scale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(angle);
    has_cached_ = true;
    return r * std::cos(angle);
}

std::vector<double> sample_detunings(const DetuningModel& model, int n, std::uint64_t seed) {
    if (n < 1) {
        throw ConfigError("sample_detunings: n must be >= 1");
    }
    const auto count = static_cast<std::size_t>(n);
    std::vector<double> out(count, 0.0);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Identical>) {
                std::fill(out.begin(), out.end(), m.delta0);
            } else if constexpr (std::is_same_v<T, TwoGroup>) {
                if (n % 2 != 0) {
                    throw ConfigError("two-group detunings need an even number of spins, got " +
                                      std::to_string(n));
                }
                if (!(m.delta >= 0.0)) {
                    throw ConfigError("two-group delta must be >= 0");
                }
                for (std::size_t i = 0; i < count; ++i) {
                    out[i] = i < count / 2 ? m.delta : -m.delta;
                }
            } else {
                if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma)) {
                    throw ConfigError("gaussian sigma must be finite and >= 0");
                }
                if (m.sigma == 0.0) {
                    return;
                }
                NormalSampler normal(seed);
                for (auto& d : out) {
                    d = m.sigma * normal();
                }
            }
        },
        model);
    return out;
}

void TimeGrid::validate() const {
    if (!(t_start >= 0.0) || !std::isfinite(t_start)) {
        throw ConfigError("time grid: t_start must be finite and >= 0");
    }
    if (!(t_end > t_start) || !std::isfinite(t_end)) {
        throw ConfigError("time grid: t_end must be finite and > t_start");
    }
    if (n_points < 2) {
        throw ConfigError("time grid: n_points must be >= 2");
    }
}

double TimeGrid::at(std::size_t i) const {
    if (i + 1 == n_points) {
        return t_end;
    }
    return t_start + (t_end - t_start) * static_cast<double>(i) / static_cast<double>(n_points - 1);
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> t(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        t[i] = at(i);
    }
    return t;
}

} // namespace spincat
