#include "mfclt/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace mfclt;

namespace {

SimConfig bench_cfg(int n, int m) {
  SimConfig cfg;
  cfg.n_particles = n;
  cfg.ensemble_size = m;
  cfg.dt = 0.01;
  cfg.horizon = 0.5;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

static void BM_InteractingSystem(benchmark::State& state) {
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = bench_cfg(static_cast<int>(state.range(0)), 1);
  std::uint32_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_interacting(spec, cfg, draw_common_noise(spec, cfg, rep), rep));
    ++rep;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * cfg.steps());
}
BENCHMARK(BM_InteractingSystem)->Arg(100)->Arg(400);

static void BM_ConditionalLawEnsemble(benchmark::State& state) {
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = bench_cfg(1, static_cast<int>(state.range(0)));
  std::uint32_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, rep), rep));
    ++rep;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * cfg.steps());
}
BENCHMARK(BM_ConditionalLawEnsemble)->Arg(500)->Arg(2000);

static void BM_DenseMeasureStepping(benchmark::State& state) {
  // Pair-interaction preset walks the cloud per evaluation: O(N^2) per step.
  const ModelSpec spec = build_preset("example2", {{"allow_dense", 1.0}});
  const SimConfig cfg = bench_cfg(static_cast<int>(state.range(0)), 1);
  std::uint32_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate_interacting(spec, cfg, draw_common_noise(spec, cfg, rep), rep));
    ++rep;
  }
}
BENCHMARK(BM_DenseMeasureStepping)->Arg(50)->Arg(100);

BENCHMARK_MAIN();
