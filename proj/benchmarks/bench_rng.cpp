#include "mfclt/rng.hpp"

#include <benchmark/benchmark.h>

using namespace mfclt;

static void BM_PhiloxBlock(benchmark::State& state) {
  std::array<std::uint32_t, 4> ctr{1, 2, 3, 4};
  std::array<std::uint32_t, 2> key{5, 6};
  for (auto _ : state) {
    ctr[0] += 1;
    benchmark::DoNotOptimize(Philox4x32::block(ctr, key));
  }
  state.SetItemsProcessed(state.iterations() * 4);  // 32-bit words per block
}
BENCHMARK(BM_PhiloxBlock);

static void BM_Normals(benchmark::State& state) {
  RngStream stream(StreamKey{1, 2, 3, 0, Purpose::Experiment});
  double acc = 0.0;
  for (auto _ : state) acc += stream.normal();
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normals);

static void BM_PrmCandidates(benchmark::State& state) {
  const auto gamma = SampleableMeasure::two_point(0.8, 2.0);
  std::uint32_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_prm_candidates(StreamKey{7, rep++, 0, 0, Purpose::PrmSystem}, gamma, 1.3, 1.0));
  }
}
BENCHMARK(BM_PrmCandidates);

BENCHMARK_MAIN();
