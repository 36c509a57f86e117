#include <benchmark/benchmark.h>

#include "sfkit/evals.hpp"
#include "sfkit/rng.hpp"
#include "sfkit/ssm.hpp"

namespace {

sfkit::Tensor make_input(std::size_t n, std::size_t c) {
  sfkit::Rng rng(1);
  sfkit::Tensor x({n, c});
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  return x;
}

void BM_ScanSequential(benchmark::State& state) {
  sfkit::Rng rng(2);
  const auto params = sfkit::hippo_init(16, 16, rng);
  const auto x = make_input(state.range(0), 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sfkit::selective_scan_seq(params, x, nullptr,
                                                       sfkit::Precision::Single));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScanSequential)->Range(1 << 10, 1 << 15);

void BM_ScanParallel(benchmark::State& state) {
  sfkit::Rng rng(2);
  const auto params = sfkit::hippo_init(16, 16, rng);
  const auto x = make_input(state.range(0), 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sfkit::selective_scan_parallel(params, x,
                                                            sfkit::Precision::Single));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScanParallel)->Range(1 << 10, 1 << 15);

void BM_AttentionBaseline(benchmark::State& state) {
  const auto x = make_input(state.range(0), 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sfkit::attention_baseline(x, sfkit::Precision::Single));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AttentionBaseline)->Range(1 << 10, 1 << 12);

}  // namespace

BENCHMARK_MAIN();
