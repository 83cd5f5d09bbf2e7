// spincat: command-line driver producing the figure data.
//
//   spincat <subcommand> --config <file> [--seed U64] [--out PATH] [--workers K]
//           [--<field> <value> ...]
//
// The config is a flat JSON object. Every subcommand has a fixed set of
// fields with defaults; anything else is rejected. The effective config
// (defaults + file + overrides, minus workers/out) is echoed as a '#' header in
// every output, and a file with such a header can itself be passed as --config.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spincat/analytic.hpp"
#include "spincat/core.hpp"
#include "spincat/csv.hpp"
#include "spincat/lindblad.hpp"
#include "spincat/meanfield.hpp"
#include "spincat/parallel.hpp"
#include "spincat/sync.hpp"

using json = nlohmann::json;
using namespace spincat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitUnconverged = 4;

struct Unconverged {};

// ---------------------------------------------------------------- schema

json grid_defaults(double t_end, int n_points) {
    return {{"t_start", 0.0}, {"t_end", t_end}, {"n_points", n_points}};
}

json merge(json a, const json& b) {
    for (auto it = b.begin(); it != b.end(); ++it) {
        a[it.key()] = it.value();
    }
    return a;
}

const std::map<std::string, json>& schemas() {
    static const std::map<std::string, json> s = [] {
        std::map<std::string, json> m;
        m["free-dephasing"] = merge(
            {{"n_spins", 200}, {"state", "css"}, {"theta", 0.07071067811865475}, {"phi", 0.0},
             {"detuning_model", "gaussian"}, {"detuning_scale", 1.0}, {"realizations", 10},
             {"kept_realizations", 10}, {"seed", 1}},
            grid_defaults(3.0, 50));
        m["analytic"] = merge({{"n_spins", 200}, {"theta", 0.07071067811865475}, {"detuning_scale", 1.0}},
                              grid_defaults(3.0, 50));
        m["lindblad"] = merge({{"basis", "full"}, {"n_spins", 8}, {"eta", 0.2}, {"gamma2", 1.0},
                               {"phase_phi", 0.0}, {"state", "cat_even"}, {"theta", "auto"},
                               {"phi", -0.7853981633974483}, {"alpha_abs", 0.0}, {"alpha_arg", 0.0},
                               {"detuning_model", "identical"}, {"detuning_scale", 0.0},
                               {"realizations", 1}, {"seed", 1}, {"atol", 1e-11}, {"rtol", 1e-9}},
                              grid_defaults(400.0, 81));
        m["hp-sweep"] = {{"n_spins", 100},   {"eta_values", {0.25, 0.5, 1.0}},
                         {"t_max", 400.0},   {"window", 10.0},
                         {"sample_dt", 1.0}, {"drift_tol", 1e-6},
                         {"atol", 1e-11},    {"rtol", 1e-9}};
        m["wigner"] = {{"n_spins", 100},   {"eta", 5.0},        {"t_max", 400.0},   {"window", 10.0},
                       {"sample_dt", 1.0}, {"drift_tol", 1e-6}, {"atol", 1e-11},    {"rtol", 1e-9},
                       {"extent", "auto"}, {"grid_points", 61}};
        m["mf-trajectory"] = merge(
            {{"model", "two_ensemble"}, {"n_spins", 1000}, {"eta", 30.0}, {"gamma2", 1.0},
             {"phase_phi", 0.0}, {"delta", 1e-4}, {"detuning_model", "two_group"}, {"start", "steady"},
             {"amplitude0", 0.0}, {"phase0", 0.0}, {"inversion0", -1.0}, {"seed", 1},
             {"atol", 1e-10}, {"rtol", 1e-8}},
            grid_defaults(100.0, 101));
        m["sync-sweep"] = {{"n_spins", 10000},
                           {"eta_values", {156.25, 312.5, 468.75}},
                           {"delta_values", {0.0, 2e6, 4e6, 6e6, 8e6}},
                           {"bisect_iterations", 8},
                           {"budget", 1e4},
                           {"sample_dt", 1.0},
                           {"window", 100.0},
                           {"drift_tol", 1e-8},
                           {"escape", std::numbers::pi / 2},
                           {"collapse_fraction", 0.1},
                           {"ground_start", false},
                           {"atol", 1e-12},
                           {"rtol", 1e-10}};
        m["ellipse-fit"] = {{"input", ""}, {"n_spins", 0}};
        for (auto& [name, schema] : m) {
            schema["subcommand"] = name;
        }
        return m;
    }();
    return s;
}

// ---------------------------------------------------------------- config access

class Config {
public:
    explicit Config(json j) : j_(std::move(j)) {}

    const json& raw() const { return j_; }

    double num(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) {
            fail(key, "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(key, "must be finite");
        }
        return d;
    }

    long long integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) {
            fail(key, "expected an integer");
        }
        return v.get<long long>();
    }

    std::uint64_t u64(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            fail(key, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    int positive_int(const std::string& key) const {
        const long long v = integer(key);
        if (v < 1 || v > 1'000'000'000) {
            fail(key, "must be a positive integer");
        }
        return static_cast<int>(v);
    }

    std::string str(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) {
            fail(key, "expected a string");
        }
        return v.get<std::string>();
    }

    bool boolean(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_boolean()) {
            fail(key, "expected true or false");
        }
        return v.get<bool>();
    }

    std::vector<double> list(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array() || v.empty()) {
            fail(key, "expected a non-empty array of numbers");
        }
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                fail(key, "expected a non-empty array of finite numbers");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::string choice(const std::string& key, const std::vector<std::string>& options) const {
        const std::string v = str(key);
        for (const auto& o : options) {
            if (o == v) {
                return v;
            }
        }
        std::string all;
        for (const auto& o : options) {
            all += (all.empty() ? "" : ", ") + o;
        }
        fail(key, "must be one of: " + all);
    }

    [[noreturn]] static void fail(const std::string& key, const std::string& msg) {
        throw ConfigError("config field '" + key + "': " + msg);
    }

private:
    const json& at(const std::string& key) const {
        auto it = j_.find(key);
        if (it == j_.end()) {
            fail(key, "missing");
        }
        return *it;
    }

    json j_;
};

// Parses a command-line override value: JSON if it parses, a comma-separated
// list of numbers for array fields, otherwise a plain string.
json parse_override(const std::string& text, const json& default_value) {
    if (default_value.is_array() && !text.empty() && text.front() != '[') {
        json arr = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                arr.push_back(json::parse(item));
            } catch (const json::exception&) {
                throw ConfigError("override: cannot parse list element '" + item + "'");
            }
        }
        return arr;
    }
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;
    }
}

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    // Output files carry their config in a "# config: {...}" header line.
    if (!text.empty() && text.front() == '#') {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const std::string tag = "# config: ";
            if (line.rfind(tag, 0) == 0) {
                try {
                    return json::parse(line.substr(tag.size()));
                } catch (const json::parse_error& e) {
                    throw ConfigError("config header in '" + path + "': " + e.what());
                }
            }
        }
        throw ConfigError("'" + path + "' has no '# config:' header line");
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // locate the offending line for the diagnostic
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
            line += text[i] == '\n';
        }
        throw ConfigError("config file '" + path + "' line " + std::to_string(line) + ": " + e.what());
    }
}

Config build_config(const std::string& sub, const std::optional<std::string>& path,
                    const std::vector<std::pair<std::string, std::string>>& overrides,
                    const std::optional<std::uint64_t>& seed) {
    const json& schema = schemas().at(sub);
    json cfg = schema;
    if (path) {
        const json file = read_config_file(*path);
        if (!file.is_object()) {
            throw ConfigError("config must be a JSON object");
        }
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (!schema.contains(it.key())) {
                throw ConfigError("config field '" + it.key() + "': unknown field for '" + sub + "'");
            }
            cfg[it.key()] = it.value();
        }
    }
    for (const auto& [key, value] : overrides) {
        if (!schema.contains(key)) {
            throw ConfigError("override --" + key + ": unknown field for '" + sub + "'");
        }
        cfg[key] = parse_override(value, schema.at(key));
    }
    if (seed) {
        if (!schema.contains("seed")) {
            throw ConfigError("--seed: '" + sub + "' does not use a seed");
        }
        cfg["seed"] = *seed;
    }
    if (cfg.at("subcommand") != sub) {
        throw ConfigError("config field 'subcommand': file is for '" +
                          cfg.at("subcommand").get<std::string>() + "', not '" + sub + "'");
    }
    return Config(cfg);
}

// ---------------------------------------------------------------- helpers

std::string header_text(const Config& c) {
    std::ostringstream os;
    os << "spincat " << c.raw().at("subcommand").get<std::string>() << "\n";
    os << "config: " << c.raw().dump() << "\n";
    if (c.raw().contains("seed")) {
        os << "seed: " << c.raw().at("seed").dump() << "\n";
    }
    return os.str();
}

TimeGrid grid_from(const Config& c) {
    TimeGrid g;
    g.t_start = c.num("t_start");
    g.t_end = c.num("t_end");
    const long long n = c.integer("n_points");
    if (n < 2) {
        Config::fail("n_points", "must be >= 2");
    }
    g.n_points = static_cast<std::size_t>(n);
    g.validate();
    return g;
}

DetuningModel detuning_from(const Config& c) {
    const std::string m = c.choice("detuning_model", {"identical", "two_group", "gaussian"});
    const double v = c.num("detuning_scale");
    if (m == "identical") {
        return Identical{v};
    }
    if (v < 0.0) {
        Config::fail("detuning_scale", "must be >= 0");
    }
    if (m == "two_group") {
        return TwoGroup{v};
    }
    return Gaussian{v};
}

double theta_from(const Config& c, const std::string& key) {
    const double th = c.num(key);
    if (th < 0.0 || th >= std::numbers::pi) {
        Config::fail(key, "must lie in [0, pi)");
    }
    return th;
}

SteadyOptions steady_from(const Config& c) {
    SteadyOptions o;
    o.t_max = c.num("t_max");
    o.window = c.num("window");
    o.sample_dt = c.num("sample_dt");
    o.drift_tol = c.num("drift_tol");
    o.master.atol = c.num("atol");
    o.master.rtol = c.num("rtol");
    if (!(o.t_max > 0.0) || !(o.sample_dt > 0.0) || o.window < o.sample_dt || !(o.drift_tol > 0.0)) {
        throw ConfigError("config: need t_max > 0, drift_tol > 0 and window >= sample_dt > 0");
    }
    if (!(o.master.atol > 0.0) || !(o.master.rtol > 0.0)) {
        throw ConfigError("config: atol and rtol must be > 0");
    }
    return o;
}

void require_n(const Config& c, int min_n) {
    const long long n = c.integer("n_spins");
    if (n < min_n) {
        Config::fail("n_spins", "must be >= " + std::to_string(min_n));
    }
}

using Runner = int (*)(const Config&, std::ostream&);

// ---------------------------------------------------------------- subcommands

int run_free_dephasing(const Config& c, std::ostream& os) {
    require_n(c, 1);
    const int n = c.positive_int("n_spins");
    const std::string st = c.choice("state", {"css", "cat_even", "cat_odd"});
    const FreeState state = st == "css" ? FreeState::css
                            : st == "cat_even" ? FreeState::cat_even
                                               : FreeState::cat_odd;
    const SpinCoherentParams css{theta_from(c, "theta"), c.num("phi")};
    const DetuningModel model = detuning_from(c);
    const TimeGrid grid = grid_from(c);
    SeedSpec seeds{c.u64("seed"), static_cast<std::size_t>(c.positive_int("realizations"))};
    const long long kept = c.integer("kept_realizations");
    if (kept < 0) {
        Config::fail("kept_realizations", "must be >= 0");
    }
    const auto mc = monte_carlo_free_dephasing(state, css, model, n, grid, seeds,
                                               static_cast<std::size_t>(kept), Execution::parallel);
    csv::Writer w(os);
    w.comment(header_text(c));
    w.comment("columns: t, realization fidelities r0..r{k-1}, Monte Carlo mean, standard error, "
              "closed-form Gaussian average (NaN unless gaussian)");
    std::vector<std::string> cols{"t"};
    for (std::size_t r = 0; r < mc.realizations.size(); ++r) {
        cols.push_back("r" + std::to_string(r));
    }
    cols.insert(cols.end(), {"mean", "stderr", "analytic"});
    w.header(cols);
    const auto* g = std::get_if<Gaussian>(&model);
    for (std::size_t k = 0; k < mc.mean.times.size(); ++k) {
        const double t = mc.mean.times[k];
        std::vector<double> row{t};
        for (const auto& r : mc.realizations) {
            row.push_back(r.values[k]);
        }
        double analytic = std::nan("");
        if (g != nullptr) {
            analytic = state == FreeState::css ? mean_fidelity_css(css.theta, g->sigma, n, t)
                       : mean_fidelity_cat(css.theta, g->sigma, n,
                                           state == FreeState::cat_even ? CatParity::even : CatParity::odd, t);
        }
        row.insert(row.end(), {mc.mean.values[k], mc.std_error[k], analytic});
        w.row(row);
    }
    return kExitOk;
}

int run_analytic(const Config& c, std::ostream& os) {
    require_n(c, 1);
    const int n = c.positive_int("n_spins");
    const double theta = theta_from(c, "theta");
    const double sigma = c.num("detuning_scale");
    if (sigma < 0.0) {
        Config::fail("detuning_scale", "must be >= 0");
    }
    if (theta == 0.0) {
        Config::fail("theta", "must be > 0 (odd cat undefined at 0)");
    }
    const TimeGrid grid = grid_from(c);
    csv::Writer w(os);
    w.comment(header_text(c));
    w.header({"t", "mean_css", "var_css", "var_css_exact", "mean_cat_even", "mean_cat_odd",
              "odd_small_amplitude"});
    for (double t : grid.times()) {
        const double e = gaussian_coherence(sigma, t);
        w.row({t, mean_fidelity_css(theta, sigma, n, t), var_fidelity_css(theta, sigma, n, t),
               var_fidelity_css_exact(theta, sigma, n, t),
               mean_fidelity_cat(theta, sigma, n, CatParity::even, t),
               mean_fidelity_cat(theta, sigma, n, CatParity::odd, t), e * e});
    }
    return kExitOk;
}

int run_lindblad(const Config& c, std::ostream& os) {
    require_n(c, 1);
    const std::string basis_name = c.choice("basis", {"full", "collective"});
    EnsembleParams p;
    p.n_spins = c.positive_int("n_spins");
    p.eta = c.num("eta");
    p.gamma2 = c.num("gamma2");
    p.phase_phi = c.num("phase_phi");
    p.validate();
    if (basis_name == "full" && p.n_spins > kFullBasisCap) {
        // same message the generator would give, before any allocation
        (void)Generator::full(p, std::vector<double>(static_cast<std::size_t>(p.n_spins), 0.0));
    }
    const std::string st = c.choice("state", {"css", "cat_even", "cat_odd", "coherent"});
    StateSpec spec;
    spec.kind = st == "css"        ? StateSpec::Kind::css
                : st == "cat_even" ? StateSpec::Kind::cat_even
                : st == "cat_odd"  ? StateSpec::Kind::cat_odd
                                   : StateSpec::Kind::coherent;
    const json& th = c.raw().at("theta");
    if (th.is_string()) {
        if (th.get<std::string>() != "auto") {
            Config::fail("theta", "expected a number or \"auto\"");
        }
        if (p.gamma2 <= 0.0) {
            Config::fail("theta", "\"auto\" needs gamma2 > 0");
        }
        // |alpha| = sqrt(N) tan(theta/2) with |alpha|^2 = 2 eta / gamma2
        spec.css.theta = 2.0 * std::atan(std::sqrt(2.0 * p.eta / p.gamma2 / p.n_spins));
    } else {
        spec.css.theta = theta_from(c, "theta");
    }
    spec.css.phi = c.num("phi");
    spec.alpha = std::polar(c.num("alpha_abs"), c.num("alpha_arg"));
    const DetuningModel model = detuning_from(c);
    const std::size_t nreal = static_cast<std::size_t>(c.positive_int("realizations"));
    const std::uint64_t seed = c.u64("seed");
    const TimeGrid grid = grid_from(c);
    MasterOptions mo;
    mo.atol = c.num("atol");
    mo.rtol = c.num("rtol");
    if (!(mo.atol > 0.0) || !(mo.rtol > 0.0)) {
        throw ConfigError("config: atol and rtol must be > 0");
    }
    if (basis_name == "collective" && !std::holds_alternative<Identical>(model)) {
        Config::fail("detuning_model", "the collective basis needs identical zero detunings");
    }
    (void)sample_detunings(model, p.n_spins, 0);
    const Basis probe{basis_name == "full" ? BasisKind::full : BasisKind::collective, p.n_spins};
    std::string warning;
    (void)prepare_pure(spec, probe, &warning);

    const auto times = grid.times();
    const std::size_t nt = times.size();
    // columns: fidelity, trace, parity, re a, im a
    std::vector<std::array<double, 5>> rows(nreal * nt);
    for_each_index(nreal, Execution::parallel, [&](std::size_t r) {
        const auto d = sample_detunings(model, p.n_spins, derive_seed(seed, r));
        const Generator gen = basis_name == "full" ? Generator::full(p, d) : Generator::collective(p, d);
        const PureState psi = prepare_pure(spec, gen.basis());
        const AmplitudeObservable amp(gen.basis());
        integrate_master(gen, to_density(psi), times, mo,
                         [&](std::size_t i, double, const Eigen::MatrixXcd& y) {
                             const DensityMatrix rho{gen.basis(), y};
                             const cplx a = amp(y);
                             rows[r * nt + i] = {fidelity_to(rho, psi), std::real(trace(rho)),
                                                 parity_expectation(rho), a.real(), a.imag()};
                             return true;
                         });
    });

    csv::Writer w(os);
    w.comment(header_text(c));
    if (!warning.empty()) {
        w.comment("warning: " + warning);
    }
    w.comment("theta used: " + csv::format(spec.css.theta));
    w.comment("rows: one block per realization, then the realization mean (realization = mean)");
    w.header({"t", "fidelity", "trace", "parity", "re_a", "im_a", "realization"});
    for (std::size_t r = 0; r < nreal; ++r) {
        for (std::size_t i = 0; i < nt; ++i) {
            const auto& v = rows[r * nt + i];
            w.row(std::vector<std::string>{csv::format(times[i]), csv::format(v[0]), csv::format(v[1]),
                                           csv::format(v[2]), csv::format(v[3]), csv::format(v[4]),
                                           std::to_string(r)});
        }
    }
    if (nreal > 1) {
        for (std::size_t i = 0; i < nt; ++i) {
            std::array<double, 5> m{};
            for (std::size_t r = 0; r < nreal; ++r) {
                for (std::size_t k = 0; k < 5; ++k) {
                    m[k] += rows[r * nt + i][k];
                }
            }
            std::vector<std::string> f{csv::format(times[i])};
            for (double v : m) {
                f.push_back(csv::format(v / static_cast<double>(nreal)));
            }
            f.push_back("mean");
            w.row(f);
        }
    }
    return kExitOk;
}

int run_hp_sweep(const Config& c, std::ostream& os) {
    require_n(c, 1);
    const int n = c.positive_int("n_spins");
    const auto etas = c.list("eta_values");
    for (double e : etas) {
        if (e < 0.0) {
            Config::fail("eta_values", "entries must be >= 0");
        }
    }
    const SteadyOptions o = steady_from(c);
    const auto pts = steady_amplitude_sweep(n, etas, o, Execution::parallel);
    csv::Writer w(os);
    w.comment(header_text(c));
    w.header({"eta", "abs_a", "re_a", "im_a", "t_final", "converged"});
    bool all = true;
    for (const auto& p : pts) {
        w.row(std::vector<std::string>{csv::format(p.eta), csv::format(p.amplitude),
                                       csv::format(p.mean_a.real()), csv::format(p.mean_a.imag()),
                                       csv::format(p.t_final), p.converged ? "1" : "0"});
        all = all && p.converged;
    }
    if (!all) {
        throw Unconverged{};
    }
    return kExitOk;
}

int run_wigner(const Config& c, std::ostream& os) {
    require_n(c, 1);
    const int n = c.positive_int("n_spins");
    const double eta = c.num("eta");
    if (eta < 0.0) {
        Config::fail("eta", "must be >= 0");
    }
    const SteadyOptions o = steady_from(c);
    const int pts = c.positive_int("grid_points");
    if (pts < 2) {
        Config::fail("grid_points", "must be >= 2");
    }
    double extent = std::sqrt(2.0 * eta) + 3.0;
    const json& ex = c.raw().at("extent");
    if (ex.is_string()) {
        if (ex.get<std::string>() != "auto") {
            Config::fail("extent", "expected a number or \"auto\"");
        }
    } else {
        extent = c.num("extent");
        if (!(extent > 0.0)) {
            Config::fail("extent", "must be > 0");
        }
    }
    DensityMatrix rho;
    const AmplitudePoint ap = steady_amplitude(n, eta, o, &rho);
    std::vector<double> axis(static_cast<std::size_t>(pts));
    for (int i = 0; i < pts; ++i) {
        axis[static_cast<std::size_t>(i)] = -extent + 2.0 * extent * i / (pts - 1);
    }
    const WignerGrid wg = wigner(rho, axis, axis, Execution::parallel);
    csv::Writer w(os);
    w.comment(header_text(c));
    w.comment("steady state: |<a>| = " + csv::format(ap.amplitude) + ", t = " + csv::format(ap.t_final) +
              ", converged = " + (ap.converged ? "1" : "0"));
    if (wg.window_exceeds_truncation) {
        w.comment("warning: window reaches |beta|^2 > N/2 where truncation distorts W");
    }
    w.header({"re_beta", "im_beta", "W"});
    for (std::size_t iy = 0; iy < axis.size(); ++iy) {
        for (std::size_t ix = 0; ix < axis.size(); ++ix) {
            w.row({axis[ix], axis[iy], wg.values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix))});
        }
    }
    if (!ap.converged) {
        throw Unconverged{};
    }
    return kExitOk;
}

int run_mf_trajectory(const Config& c, std::ostream& os) {
    const std::string model =
        c.choice("model", {"full", "symmetric", "two_ensemble", "two_ensemble_printed"});
    require_n(c, 1);
    EnsembleParams p;
    p.n_spins = c.positive_int("n_spins");
    p.eta = c.num("eta");
    p.gamma2 = c.num("gamma2");
    p.phase_phi = c.num("phase_phi");
    p.validate();
    const double delta = c.num("delta");
    const std::string start = c.choice("start", {"steady", "ground", "custom"});
    const TimeGrid grid = grid_from(c);
    OdeOptions o;
    o.atol = c.num("atol");
    o.rtol = c.num("rtol");
    if (!(o.atol > 0.0) || !(o.rtol > 0.0)) {
        throw ConfigError("config: atol and rtol must be > 0");
    }
    const bool two_group = model != "symmetric";
    ReducedState s0;
    if (start == "steady") {
        s0 = symmetric_steady_state(p.n_spins, p.eta / p.gamma2);
        if (two_group) {
            s0.phase = 0.0;
        }
    } else if (start == "ground") {
        s0 = {1e-3, two_group ? 0.0 : std::numbers::pi / 4, -1.0 + 2e-6};
    } else {
        s0 = {c.num("amplitude0"), c.num("phase0"), c.num("inversion0")};
        if (s0.amplitude < 0.0 || 4.0 * s0.amplitude * s0.amplitude + s0.inversion * s0.inversion > 1.0 + 1e-12) {
            throw ConfigError("config: custom start violates 4 A^2 + z^2 <= 1");
        }
    }
    csv::Writer w(os);
    w.comment(header_text(c));
    const auto times = grid.times();
    if (model == "full") {
        const std::string dm = c.choice("detuning_model", {"identical", "two_group", "gaussian"});
        DetuningModel det = dm == "identical" ? DetuningModel{Identical{delta}}
                            : dm == "two_group" ? DetuningModel{TwoGroup{delta}}
                                                : DetuningModel{Gaussian{delta}};
        const auto d = sample_detunings(det, p.n_spins, derive_seed(c.u64("seed"), 0));
        const MeanFieldState init =
            dm == "two_group" ? two_group_state(p.n_spins, s0) : symmetric_state(p.n_spins, s0);
        w.comment("columns: spin-0 amplitude and phase (phase - pi/4 for two_group), spin-0 inversion, "
                  "ensemble means, max 4|s|^2 + z^2");
        w.header({"t", "amplitude", "phase", "inversion", "mean_re_s", "mean_im_s", "mean_z", "max_bloch"});
        integrate_full(p, d, init, times, o, Execution::parallel,
                       [&](std::size_t, double t, const Eigen::VectorXd& y) {
                           const MeanFieldState s = unpack(y);
                           const double off = dm == "two_group" ? std::numbers::pi / 4 : 0.0;
                           std::complex<double> ms(0.0, 0.0);
                           double mz = 0.0;
                           for (std::size_t i = 0; i < s.size(); ++i) {
                               ms += s.coherences[i];
                               mz += s.inversions[i];
                           }
                           const double nn = static_cast<double>(s.size());
                           w.row({t, std::abs(s.coherences[0]), std::arg(s.coherences[0]) - off,
                                  s.inversions[0], ms.real() / nn, ms.imag() / nn, mz / nn,
                                  s.max_bloch_norm()});
                           return true;
                       });
        return kExitOk;
    }
    const ReducedModel rm = model == "symmetric"      ? ReducedModel::symmetric
                            : model == "two_ensemble" ? ReducedModel::two_ensemble
                                                      : ReducedModel::two_ensemble_printed;
    const auto traj = integrate_reduced(rm, p, delta, s0, times, o);
    w.header({"t", "amplitude", "phase", "inversion"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        w.row({times[i], traj[i].amplitude, traj[i].phase, traj[i].inversion});
    }
    return kExitOk;
}

int run_sync_sweep(const Config& c, std::ostream& os) {
    const int n = c.positive_int("n_spins");
    if (n % 2 != 0 || n < 2) {
        Config::fail("n_spins", "must be even and >= 2");
    }
    const auto etas = c.list("eta_values");
    const auto deltas = c.list("delta_values");
    SyncOptions o;
    o.budget = c.num("budget");
    o.sample_dt = c.num("sample_dt");
    o.window = c.num("window");
    o.drift_tol = c.num("drift_tol");
    o.escape = c.num("escape");
    o.collapse_fraction = c.num("collapse_fraction");
    o.ground_start = c.boolean("ground_start");
    o.atol = c.num("atol");
    o.rtol = c.num("rtol");
    const long long iters = c.integer("bisect_iterations");
    if (iters < 0 || iters > 60) {
        Config::fail("bisect_iterations", "must lie in [0, 60]");
    }
    if (!(o.budget > 0.0) || !(o.sample_dt > 0.0) || !(o.window > 0.0) || !(o.drift_tol > 0.0) ||
        !(o.escape > 0.0) || !(o.atol > 0.0) || !(o.rtol > 0.0)) {
        throw ConfigError("config: budget, sample_dt, window, drift_tol, escape, atol, rtol must be > 0");
    }
    for (double e : etas) {
        if (e < 0.0) {
            Config::fail("eta_values", "entries must be >= 0");
        }
    }
    auto points = sync_phase_sweep(n, etas, deltas, o, Execution::parallel);
    std::vector<SyncPhasePoint> refined;
    const auto boundary = refine_boundary(n, points, static_cast<int>(iters), o, &refined, Execution::parallel);
    csv::Writer w(os);
    w.comment(header_text(c));
    w.comment("rows: grid points, then bisection refinement points; delta_tilde = N^2 delta / Gamma2");
    for (const auto& b : boundary) {
        w.comment("boundary: eta_tilde=" + csv::format(b.eta_tilde) + " delta_lo=" + csv::format(b.delta_lo) +
                  " delta_hi=" + csv::format(b.delta_hi));
    }
    w.header({"eta_tilde", "delta_tilde", "zeta_ss", "status"});
    bool unconverged = false;
    points.insert(points.end(), refined.begin(), refined.end());
    for (const auto& p : points) {
        w.row(std::vector<std::string>{csv::format(p.eta_tilde), csv::format(p.delta_tilde),
                                       csv::format(p.zeta_ss.value_or(std::nan(""))), to_string(p.status)});
        unconverged = unconverged || p.status == SyncStatus::unconverged;
    }
    if (unconverged) {
        throw Unconverged{};
    }
    return kExitOk;
}

int run_ellipse_fit(const Config& c, std::ostream& os) {
    const std::string input = c.str("input");
    if (input.empty()) {
        Config::fail("input", "path of a sync-sweep CSV is required");
    }
    const csv::Table t = csv::read_file(input);
    long long n = c.integer("n_spins");
    if (n == 0) {
        for (const auto& line : t.comments) {
            const std::string tag = "config: ";
            if (line.rfind(tag, 0) == 0) {
                const json cfg = json::parse(line.substr(tag.size()));
                if (cfg.contains("n_spins")) {
                    n = cfg.at("n_spins").get<long long>();
                }
            }
        }
    }
    if (n < 1) {
        Config::fail("n_spins", "not given and not found in the input header");
    }
    const std::size_t ce = t.column("eta_tilde");
    const std::size_t cd = t.column("delta_tilde");
    const std::size_t cz = t.column("zeta_ss");
    const std::size_t cs = t.column("status");
    std::vector<SyncPhasePoint> pts;
    for (const auto& row : t.rows) {
        SyncPhasePoint p;
        p.eta_tilde = csv::parse_double(row[ce]);
        p.delta_tilde = csv::parse_double(row[cd]);
        const double z = csv::parse_double(row[cz]);
        if (!std::isnan(z)) {
            p.zeta_ss = z;
        }
        p.status = sync_status_from_string(row[cs]);
        pts.push_back(p);
    }
    const EllipseFit f = fit_ellipse(pts, static_cast<int>(n));
    json out = {{"a", f.a},          {"b", f.b},         {"residual", f.residual},
                {"eta_c", f.eta_c},  {"delta_c", f.delta_c}, {"n", f.n}};
    os << out.dump(2) << "\n";
    return kExitOk;
}

const std::map<std::string, Runner>& runners() {
    static const std::map<std::string, Runner> r{
        {"free-dephasing", run_free_dephasing}, {"analytic", run_analytic},
        {"lindblad", run_lindblad},             {"hp-sweep", run_hp_sweep},
        {"wigner", run_wigner},                 {"mf-trajectory", run_mf_trajectory},
        {"sync-sweep", run_sync_sweep},         {"ellipse-fit", run_ellipse_fit}};
    return r;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spincat: spin cat dephasing, Lindblad and mean-field synchronization data"};
    app.require_subcommand(1, 1);
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_path;
    std::optional<int> workers;
    for (const auto& [name, runner] : runners()) {
        auto* sub = app.add_subcommand(name, "");
        sub->add_option("--config", config_path, "JSON config (or an output file with a config header)");
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--out", out_path, "output path (default: stdout)");
        sub->add_option("--workers", workers, "worker threads (default: all available)");
        sub->allow_extras();
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        const auto extras = sub->remaining();
        for (std::size_t i = 0; i < extras.size(); ++i) {
            const std::string& flag = extras[i];
            if (flag.rfind("--", 0) != 0 || flag.size() < 3) {
                throw ConfigError("unexpected argument '" + flag + "'");
            }
            std::string key = flag.substr(2);
            std::string value;
            if (const auto eq = key.find('='); eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else {
                if (i + 1 >= extras.size()) {
                    throw ConfigError("override --" + key + " needs a value");
                }
                value = extras[++i];
            }
            overrides.emplace_back(key, value);
        }
        if (workers && *workers < 1) {
            throw ConfigError("--workers must be >= 1");
        }
        set_worker_count(workers.value_or(0));
        const Config cfg = build_config(name, config_path, overrides, seed);

        std::ostringstream buffer;
        int code = kExitOk;
        try {
            code = runners().at(name)(cfg, buffer);
        } catch (const Unconverged&) {
            code = kExitUnconverged;
        }
        if (out_path) {
            std::ofstream f(*out_path, std::ios::binary);
            if (!f) {
                throw ConfigError("cannot write '" + *out_path + "'");
            }
            f << buffer.str();
        } else {
            std::cout << buffer.str();
        }
        if (code == kExitUnconverged) {
            std::cerr << "spincat " << name << ": unconverged results present (flagged in output)\n";
        }
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "spincat " << name << ": config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "spincat " << name << ": numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const json::exception& e) {
        std::cerr << "spincat " << name << ": config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "spincat " << name << ": error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
