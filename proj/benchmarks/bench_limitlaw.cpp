#include "mfclt/limitlaw.hpp"

#include <benchmark/benchmark.h>

using namespace mfclt;

namespace {

struct KernelFixture {
  ModelSpec spec = build_preset("example1");
  SimConfig cfg;
  CommonFactorRealization common;
  std::vector<KernelPathSample> samples;

  explicit KernelFixture(int m) {
    cfg.n_particles = 1;
    cfg.ensemble_size = 200;
    cfg.dt = 0.01;
    cfg.horizon = 0.5;
    cfg.seed = 23;
    common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
    samples.resize(static_cast<std::size_t>(m));
    for_each_iid_given_common(spec, cfg, common, m, 0, 0, 1, [&](ParticlePath&& p, int i) {
      samples[static_cast<std::size_t>(i)].path = std::move(p);
    });
    compute_s0_paths(spec, common, samples);
  }
};

}  // namespace

static void BM_KernelMatrixAssembly(benchmark::State& state) {
  KernelFixture fx(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_kernel_matrix(fx.spec, fx.cfg, fx.common, fx.samples));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_KernelMatrixAssembly)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_ResolventSolve(benchmark::State& state) {
  KernelFixture fx(static_cast<int>(state.range(0)));
  const auto matrix = build_kernel_matrix(fx.spec, fx.cfg, fx.common, fx.samples);
  Eigen::VectorXd phi(matrix.size());
  for (int i = 0; i < matrix.size(); ++i)
    phi[i] = fx.samples[static_cast<std::size_t>(i)].path.terminal()[0];
  phi.array() -= phi.mean();
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_resolvent(matrix, phi));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ResolventSolve)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_ResponsePaths(benchmark::State& state) {
  KernelFixture fx(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    compute_s0_paths(fx.spec, fx.common, fx.samples);
    benchmark::DoNotOptimize(fx.samples.front().h_path.back());
  }
}
BENCHMARK(BM_ResponsePaths)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
