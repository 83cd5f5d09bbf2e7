// Serial vs parallel kernels. Second argument of each case: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "spincat/analytic.hpp"
#include "spincat/lindblad.hpp"
#include "spincat/meanfield.hpp"
#include "spincat/parallel.hpp"

using namespace spincat;

namespace {

Execution exec_of(const benchmark::State& st) { return st.range(1) != 0 ? Execution::parallel : Execution::serial; }

EnsembleParams params(int n, double eta) {
    EnsembleParams p;
    p.n_spins = n;
    p.eta = eta;
    p.gamma2 = 1.0;
    return p;
}

DensityMatrix some_state(const Generator& g) {
    StateSpec s;
    s.kind = StateSpec::Kind::cat_even;
    s.css = {0.6, -0.785};
    return to_density(prepare_pure(s, g.basis()));
}

void BM_apply_full(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Generator g = Generator::full(params(n, 0.2), sample_detunings(Gaussian{0.01}, n, 1));
    const DensityMatrix rho = some_state(g);
    Eigen::MatrixXcd out;
    for (auto _ : st) {
        g.apply(rho.rho, out, exec_of(st));
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply_full)->ArgsProduct({{6, 8, 10}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_apply_full_reference(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Generator g = Generator::full(params(n, 0.2), sample_detunings(Gaussian{0.01}, n, 1));
    const DensityMatrix rho = some_state(g);
    for (auto _ : st) {
        benchmark::DoNotOptimize(g.apply_reference(rho.rho).data());
    }
}
BENCHMARK(BM_apply_full_reference)->Arg(6)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_apply_collective(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Generator g = Generator::collective(params(n, 5.0));
    const DensityMatrix rho = some_state(g);
    Eigen::MatrixXcd out;
    for (auto _ : st) {
        g.apply(rho.rho, out, exec_of(st));
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_apply_collective)->ArgsProduct({{100, 400}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_sparse_times_dense(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const Generator g = Generator::full(params(n, 0.2), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    const DensityMatrix rho = some_state(g);
    Eigen::MatrixXcd out;
    for (auto _ : st) {
        sparse_times_dense(g.jump(), rho.rho, out, exec_of(st));
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_sparse_times_dense)->ArgsProduct({{8, 10}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_mf_rhs_full(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const EnsembleParams p = params(n, 0.03 * n);
    const auto d = sample_detunings(Gaussian{0.01}, n, 2);
    ReducedState s0{0.5 * std::sqrt(0.06), 0.5, -0.9};
    const Eigen::VectorXd y = pack(two_group_state(n, s0));
    Eigen::VectorXd dy;
    for (auto _ : st) {
        mf_rhs_full(y, p, d, dy, exec_of(st));
        benchmark::DoNotOptimize(dy.data());
    }
}
BENCHMARK(BM_mf_rhs_full)->ArgsProduct({{1000, 100000}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_mf_rhs_full_reference(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const EnsembleParams p = params(n, 0.03 * n);
    const auto d = sample_detunings(Gaussian{0.01}, n, 2);
    const MeanFieldState s = two_group_state(n, {0.1, 0.5, -0.9});
    for (auto _ : st) {
        benchmark::DoNotOptimize(mf_rhs_full_reference(s, p, d).inversions.data());
    }
}
BENCHMARK(BM_mf_rhs_full_reference)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_wigner(benchmark::State& st) {
    const Generator g = Generator::collective(params(60, 1.0));
    const DensityMatrix rho = some_state(g);
    std::vector<double> axis;
    for (int i = 0; i < 41; ++i) {
        axis.push_back(-3.0 + 0.15 * i);
    }
    for (auto _ : st) {
        benchmark::DoNotOptimize(wigner(rho, axis, axis, exec_of(st)).values.data());
    }
}
BENCHMARK(BM_wigner)->ArgsProduct({{60}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_monte_carlo(benchmark::State& st) {
    for (auto _ : st) {
        const auto r = monte_carlo_free_dephasing(FreeState::cat_even, {0.07, 0.0}, Gaussian{1.0},
                                                  static_cast<int>(st.range(0)), TimeGrid{0.0, 3.0, 50},
                                                  SeedSpec{1, 2000}, 0, exec_of(st));
        benchmark::DoNotOptimize(r.mean.values.data());
    }
}
BENCHMARK(BM_monte_carlo)->ArgsProduct({{200}, {0, 1}})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
