// Microbenchmarks for the per-mode kernels and the grid-scale operations that
// dominate the nonlinear runs.

#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "twofluid/evolve.hpp"
#include "twofluid/modes.hpp"
#include "twofluid/spectral.hpp"

using namespace twofluid;

namespace {

struct Setup {
    PhaseLaw phase{2.0, 2.0};
    CapillaryLaw cap{0.0, 1.0, 0.0, 0.0};
    Viscosities visc{2.0, 2.0, 0.0, 0.0};
    ModelCoefficients c;
    double eta;
    BoxGrid grid;
    State mode_state;

    Setup()
        : c(derive_coefficients(solve_equilibrium(phase, cap), visc, cap)),
          eta(eta_threshold(c, c.theta / 10.0) / 3.0),
          grid(32, std::numbers::pi * 32.0 / (6.0 * eta)),
          mode_state(make_state(mode_to_state(build_mode(eta, c, grid), grid), 1e-3)) {}
};

Setup& setup() {
    static Setup s;
    return s;
}

} // namespace

static void BM_ClosureAt(benchmark::State& state) {
    auto& s = setup();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.9, 1.1);
    double warm = 2.0;
    for (auto _ : state) {
        const LocalClosure lc = closure_at(u(rng), u(rng), s.phase, s.cap, warm, 50);
        warm = lc.rho_plus;
        benchmark::DoNotOptimize(warm);
    }
}
BENCHMARK(BM_ClosureAt);

static void BM_Eigenvalues(benchmark::State& state) {
    auto& s = setup();
    double r = 0.1;
    for (auto _ : state) {
        auto l = eigenvalues(r, s.c);
        benchmark::DoNotOptimize(l);
        r = r < 100.0 ? r * 1.01 : 0.1;
    }
}
BENCHMARK(BM_Eigenvalues);

static void BM_Lambda1(benchmark::State& state) {
    auto& s = setup();
    double r = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lambda1(r, s.c));
        r = r < 100.0 ? r * 1.01 : 0.1;
    }
}
BENCHMARK(BM_Lambda1);

static void BM_Projectors(benchmark::State& state) {
    auto& s = setup();
    for (auto _ : state) {
        auto d = projectors(1.3, s.c);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(BM_Projectors);

static void BM_Propagator(benchmark::State& state) {
    auto& s = setup();
    for (auto _ : state) {
        auto e = propagator(1.3, s.c, 0.05);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_Propagator);

static void BM_Expm(benchmark::State& state) {
    auto& s = setup();
    const Mat4 a = 0.05 * symbol_matrix(1.3, s.c);
    for (auto _ : state) {
        auto e = expm(a);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_Expm);

static void BM_TransformRoundTrip(benchmark::State& state) {
    const BoxGrid grid(int(state.range(0)), 2.0 * std::numbers::pi);
    ScalarField f(grid);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (double& x : f.v) x = nd(rng);
    for (auto _ : state) {
        const ScalarField back = inverse(transform(f));
        benchmark::DoNotOptimize(back.v.data());
    }
}
BENCHMARK(BM_TransformRoundTrip)->Arg(32)->Arg(64);

static void BM_EvolveLinearStep(benchmark::State& state) {
    auto& s = setup();
    for (auto _ : state) {
        const State next = evolve_linear(s.mode_state, s.c, 0.05);
        benchmark::DoNotOptimize(next.t);
    }
}
BENCHMARK(BM_EvolveLinearStep);

static void BM_NonlinearTendency(benchmark::State& state) {
    auto& s = setup();
    for (auto _ : state) {
        const State rhs = nonlinear_rhs(s.mode_state, s.phase, s.cap, s.visc, s.c);
        benchmark::DoNotOptimize(rhs.t);
    }
}
BENCHMARK(BM_NonlinearTendency);

BENCHMARK_MAIN();
