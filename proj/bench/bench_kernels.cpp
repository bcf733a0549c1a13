// Serial references against the OpenMP kernels. Thread count follows
// OMP_NUM_THREADS / SPILLOVER_THREADS.

#include <benchmark/benchmark.h>

#include "spillover/gaussian_copula.hpp"
#include "spillover/mtr_parametric.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/prte.hpp"
#include "spillover/semiparametric.hpp"
#include "spillover/simulation.hpp"

using namespace spillover;

namespace {

struct Fixture {
    Dataset data;
    ParametricFit fit;
    std::vector<TreatmentPair> d;
    EffectSurfaces surfaces;

    explicit Fixture(std::size_t G) {
        DgpConfig cfg;
        cfg.G = G;
        cfg.seed = 99;
        data = simulate_dataset(cfg);
        fit = fit_parametric(data, ParametricConfig{});
        d = treatment_pairs(data);
        for (int k = 0; k < 2; ++k) {
            surfaces.mcse[static_cast<std::size_t>(k)] = mcse_surface(fit.mtr, 0, k);
            surfaces.mcde[static_cast<std::size_t>(k)] = mcde_surface(fit.mtr, 0, k);
        }
    }
};

const Fixture& fixture() {
    static const Fixture f(5000);
    return f;
}

Exec mode(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void BM_RhoLoglikReference(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(rho_loglik_reference(0.2, f.d, f.fit.props));
}

void BM_RhoLoglikKernel(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(rho_loglik_kernel(0.2, f.d, f.fit.props, mode(state)));
}

void BM_MtrDesign(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) {
        const MtrDesign m = build_mtr_design(f.data, 0, 1, 1, f.fit.props, f.fit.copula.rho, false, mode(state));
        benchmark::DoNotOptimize(m.X.data());
    }
}

void BM_PrteKernel(benchmark::State& state) {
    const Fixture& f = fixture();
    const auto after = apply_policy(PolicySpec::proportional(0.05), f.fit.props);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            prte_from_pairs(f.surfaces, f.fit.copula, f.fit.props, after, 0, kDefaultPrteOrder, mode(state)).prte);
    }
}

void BM_PrteReference(benchmark::State& state) {
    const Fixture& f = fixture();
    const auto after = apply_policy(PolicySpec::proportional(0.05), f.fit.props);
    for (auto _ : state) benchmark::DoNotOptimize(prte_reference(f.surfaces, f.fit.copula, f.fit.props, after, 0, 32).prte);
}

void BM_CopulaDensityGrid(benchmark::State& state) {
    const Fixture& f = fixture();
    std::vector<Point2> grid;
    for (double a : {0.3, 0.4, 0.5, 0.6, 0.7}) {
        for (double b : {0.3, 0.4, 0.5, 0.6, 0.7}) grid.push_back({a, b});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            estimate_copula_density_semiparam(f.data, f.fit.props, grid, 0.3, KernelType::Epanechnikov, mode(state)));
    }
}

void BM_Simulate(benchmark::State& state) {
    DgpConfig cfg;
    cfg.G = 100000;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_dataset(cfg, mode(state)).groups.data());
}

}  // namespace

// Argument 0 is the serial reference loop, 1 the OpenMP kernel.
BENCHMARK(BM_RhoLoglikReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RhoLoglikKernel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MtrDesign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrteKernel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrteReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CopulaDensityGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
