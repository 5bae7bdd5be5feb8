#include "fredholm/density_estimation.hpp"
#include "fredholm/particle_solver.hpp"
#include "fredholm/problems.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace fredholm;

void BM_drift(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ExperimentPreset p = preset_gaussian_mixture_1d();
    const auto obs = p.sample_observations(n, 1);
    const auto ref = p.reference(obs);
    const auto cloud = initialize(p.init, n, 1, obs, ref);
    for (auto _ : state) {
        benchmark::DoNotOptimize(drift_empirical(cloud, obs, *p.kernel, ref, 1e-3, 0.0));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_drift)->RangeMultiplier(4)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_kde_grid(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ExperimentPreset p = preset_gaussian_mixture_1d();
    const auto obs = p.sample_observations(n, 2);
    const auto cloud = initialize(p.init, n, 2, obs, p.reference(obs));
    const auto h = silverman_bandwidth(cloud);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kde_grid(cloud, h, *p.metric_grid));
    }
}
BENCHMARK(BM_kde_grid)->Arg(200)->Arg(1000);

void BM_solver_step(benchmark::State& state) {
    const ExperimentPreset p = preset_toy_gaussian();
    const auto obs = p.sample_observations(10000, 3);
    const auto ref = p.reference(obs);
    SolverConfig s = p.solver;
    s.max_steps = 1;
    s.monitor_every = 0;
    const auto init = initialize(p.init, s.n_particles, 3, obs, ref);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run(s, *p.kernel, ref, init, obs));
    }
}
BENCHMARK(BM_solver_step);

}  // namespace

BENCHMARK_MAIN();
