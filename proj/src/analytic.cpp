#include "spincat/analytic.hpp"

#include <cmath>
#include <string>

namespace spincat {

namespace {

constexpr int kLogSpaceThreshold = 1000;

// Product of complex factors; switches to log-space accumulation for large N.
class ComplexProduct {
public:
    explicit ComplexProduct(bool log_space) : log_space_(log_space) {}

    void mul(std::complex<double> z) {
        if (!log_space_) {
            value_ *= z;
            return;
        }
        const double m = std::abs(z);
        if (m == 0.0) {
            zero_ = true;
            return;
        }
        log_mag_ += std::log(m);
        arg_ += std::arg(z);
    }

    std::complex<double> get() const {
        if (!log_space_) {
            return value_;
        }
        if (zero_) {
            return {0.0, 0.0};
        }
        return std::polar(std::exp(log_mag_), arg_);
    }

private:
    bool log_space_;
    std::complex<double> value_{1.0, 0.0};
    double log_mag_ = 0.0;
    double arg_ = 0.0;
    bool zero_ = false;
};

double real_product(const std::vector<double>& factors) {
    if (factors.size() <= static_cast<std::size_t>(kLogSpaceThreshold)) {
        double p = 1.0;
        for (double f : factors) {
            p *= f;
        }
        return p;
    }
    double log_sum = 0.0;
    for (double f : factors) {
        if (f <= 0.0) {
            return 0.0;
        }
        log_sum += std::log(f);
    }
    return std::exp(log_sum);
}

// x^n for x in [0, 1], stable for large n.
double pow_n(double x, int n) {
    if (n > kLogSpaceThreshold && x > 0.0) {
        return std::exp(static_cast<double>(n) * std::log(x));
    }
    return std::pow(x, n);
}

void check_theta(double theta) {
    if (!std::isfinite(theta) || theta < 0.0 || theta >= std::acos(-1.0)) {
        throw ConfigError("theta must lie in [0, pi)");
    }
}

void check_common(double delta_sigma, int n) {
    if (n < 1) {
        throw ConfigError("n must be >= 1");
    }
    if (!(delta_sigma >= 0.0)) {
        throw ConfigError("delta_sigma must be >= 0");
    }
}

double sign_of(CatParity p) { return p == CatParity::even ? 1.0 : -1.0; }

} // namespace

double gaussian_coherence(double sigma, double t) {
    if (sigma == 0.0 || t == 0.0) {
        return 1.0;
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    const double x = sigma * t;
    return std::exp(-0.5 * x * x);
}

std::complex<double> overlap_free(const SpinCoherentParams& css, const std::vector<double>& detunings,
                                  double t) {
    if (detunings.empty()) {
        throw ConfigError("overlap_free: need at least one detuning");
    }
    const double c2 = std::pow(std::cos(0.5 * css.theta), 2);
    const double s2 = std::pow(std::sin(0.5 * css.theta), 2);
    ComplexProduct prod(detunings.size() > static_cast<std::size_t>(kLogSpaceThreshold));
    for (double d : detunings) {
        const double x = d * t;
        prod.mul(std::polar(1.0, 0.5 * x) * (c2 + std::polar(s2, -x)));
    }
    return prod.get();
}

double fidelity_css_exact(double theta, const std::vector<double>& detunings, double t) {
    if (detunings.empty()) {
        throw ConfigError("fidelity_css_exact: need at least one detuning");
    }
    const double s = std::sin(theta);
    std::vector<double> factors(detunings.size());
    for (std::size_t i = 0; i < detunings.size(); ++i) {
        factors[i] = 1.0 - 0.5 * s * s * (1.0 - std::cos(detunings[i] * t));
    }
    return real_product(factors);
}

double mean_fidelity_css(double theta, double delta_sigma, int n, double t) {
    check_common(delta_sigma, n);
    const double s = std::sin(theta);
    const double e = gaussian_coherence(delta_sigma, t);
    return pow_n(1.0 - 0.5 * (1.0 - e) * s * s, n);
}

double var_fidelity_css(double theta, double delta_sigma, int n, double t) {
    check_common(delta_sigma, n);
    const double e = gaussian_coherence(delta_sigma, t);
    const double th2 = theta * theta;
    return static_cast<double>(n) * th2 * th2 / 8.0 * (1.0 - e * e);
}

double var_fidelity_css_exact(double theta, double delta_sigma, int n, double t) {
    check_common(delta_sigma, n);
    const double s2 = std::pow(std::sin(theta), 2);
    const double e = gaussian_coherence(delta_sigma, t);  // E[cos(d t)]
    const double e4 = e * e * e * e;                      // E[cos(2 d t)]
    const double m1 = 1.0 - 0.5 * s2 * (1.0 - e);
    // E[(1 - cos)^2] = 1 - 2 E[cos] + (1 + E[cos 2x]) / 2
    const double one_minus_cos_sq = 1.0 - 2.0 * e + 0.5 * (1.0 + e4);
    const double m2 = 1.0 - s2 * (1.0 - e) + 0.25 * s2 * s2 * one_minus_cos_sq;
    return pow_n(m2, n) - pow_n(m1 * m1, n);
}

double cat_norm(double theta, int n, CatParity parity) {
    if (n < 1) {
        throw ConfigError("cat_norm: n must be >= 1");
    }
    check_theta(theta);
    if (parity == CatParity::odd && theta == 0.0) {
        throw ConfigError("odd cat state is undefined at theta = 0");
    }
    return std::sqrt(2.0 * (1.0 + sign_of(parity) * std::pow(std::cos(theta), n)));
}

double overlap_cat_exact(const SpinCoherentParams& css, CatParity parity,
                         const std::vector<double>& detunings, double t) {
    if (detunings.empty()) {
        throw ConfigError("overlap_cat_exact: need at least one detuning");
    }
    const int n = static_cast<int>(detunings.size());
    const double norm = cat_norm(css.theta, n, parity);
    const double c2 = std::pow(std::cos(0.5 * css.theta), 2);
    const double s2 = std::pow(std::sin(0.5 * css.theta), 2);
    const bool log_space = n > kLogSpaceThreshold;
    ComplexProduct same(log_space);
    ComplexProduct cross(log_space);
    for (double d : detunings) {
        const double x = d * t;
        const auto g = std::polar(1.0, 0.5 * x);
        const auto e = std::polar(s2, -x);
        same.mul(g * (c2 + e));
        cross.mul(g * (c2 - e));
    }
    // <a|U|a> = <b|U|b> = same, <a|U|b> = <b|U|a> = cross (branches phi and phi + pi)
    const auto c = 2.0 * (same.get() + sign_of(parity) * cross.get()) / (norm * norm);
    return std::norm(c);
}

double mean_fidelity_cat(double theta, double delta_sigma, int n, CatParity parity, double t) {
    check_common(delta_sigma, n);
    const double norm = cat_norm(theta, n, parity);
    const double s2 = std::pow(std::sin(theta), 2);
    const double e = gaussian_coherence(delta_sigma, t);
    const double sign = sign_of(parity);
    if (std::cos(theta) > 0.0) {
        // every term written as expm1 of an O(N theta^2) exponent: for small
        // N theta^2 the odd-cat numerator and normalization both vanish and
        // the direct form loses most digits
        const double nn = n;
        const double a1 = std::expm1(nn * std::log1p(-0.5 * (1.0 - e) * s2));
        const double a2 = std::expm1(nn * std::log1p(-0.5 * (1.0 + e) * s2));
        const double c = std::expm1(0.5 * nn * std::log1p(-s2));  // cos^N theta - 1
        const double num = (1.0 + sign) * 2.0 + a1 + a2 + sign * 2.0 * c;
        const double half_norm2 = (1.0 + sign) + sign * c;  // 1 +- cos^N theta
        return num / (half_norm2 * half_norm2);
    }
    const double n4 = std::pow(norm, 4);
    const double sum = pow_n(1.0 - 0.5 * (1.0 - e) * s2, n) + pow_n(1.0 - 0.5 * (1.0 + e) * s2, n) +
                       sign * 2.0 * std::pow(std::cos(theta), n);
    return 4.0 / n4 * sum;
}

MonteCarloResult monte_carlo_free_dephasing(FreeState state, const SpinCoherentParams& css,
                                            const DetuningModel& model, int n, const TimeGrid& grid,
                                            const SeedSpec& seeds, std::size_t kept, Execution exec) {
    if (seeds.realization_count == 0) {
        throw ConfigError("realization_count must be >= 1");
    }
    if (std::holds_alternative<Identical>(model)) {
        throw ConfigError("free dephasing Monte Carlo needs a gaussian or two_group detuning model");
    }
    grid.validate();
    check_theta(css.theta);
    if (state == FreeState::cat_odd && css.theta == 0.0) {
        throw ConfigError("odd cat state is undefined at theta = 0");
    }
    (void)sample_detunings(model, n, 0);  // surface model errors before the parallel region

    const auto times = grid.times();
    const std::size_t nt = times.size();
    const std::size_t nr = seeds.realization_count;
    std::vector<double> values(nr * nt);

    for_each_index(nr, exec, [&](std::size_t r) {
        const auto d = sample_detunings(model, n, derive_seed(seeds.master_seed, r));
        for (std::size_t k = 0; k < nt; ++k) {
            double f = 0.0;
            switch (state) {
            case FreeState::css:
                f = fidelity_css_exact(css.theta, d, times[k]);
                break;
            case FreeState::cat_even:
                f = overlap_cat_exact(css, CatParity::even, d, times[k]);
                break;
            case FreeState::cat_odd:
                f = overlap_cat_exact(css, CatParity::odd, d, times[k]);
                break;
            }
            values[r * nt + k] = f;
        }
    });

    MonteCarloResult out;
    const std::size_t keep = std::min(kept, nr);
    out.realizations.resize(keep);
    for (std::size_t r = 0; r < keep; ++r) {
        out.realizations[r].times = times;
        out.realizations[r].values.assign(values.begin() + static_cast<std::ptrdiff_t>(r * nt),
                                          values.begin() + static_cast<std::ptrdiff_t>((r + 1) * nt));
    }
    out.mean.times = times;
    out.mean.values.assign(nt, 0.0);
    out.std_error.assign(nt, 0.0);
    out.variance.assign(nt, 0.0);
    out.variance_std_error.assign(nt, 0.0);
    const double m = static_cast<double>(nr);
    for (std::size_t k = 0; k < nt; ++k) {
        double sum = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            sum += values[r * nt + k];
        }
        const double mean = sum / m;
        double s2 = 0.0;
        double s4 = 0.0;
        for (std::size_t r = 0; r < nr; ++r) {
            const double dv = values[r * nt + k] - mean;
            s2 += dv * dv;
            s4 += dv * dv * dv * dv;
        }
        out.mean.values[k] = mean;
        if (nr > 1) {
            const double var = s2 / (m - 1.0);
            const double mu2 = s2 / m;
            const double mu4 = s4 / m;
            out.variance[k] = var;
            out.std_error[k] = std::sqrt(var / m);
            // large-sample standard error of the sample variance
            out.variance_std_error[k] = std::sqrt(std::max(0.0, (mu4 - mu2 * mu2) / m));
        }
    }
    return out;
}

} // namespace spincat
