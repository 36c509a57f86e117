#include <benchmark/benchmark.h>

#include "sfkit/rng.hpp"
#include "sfkit/voxel.hpp"

namespace {

sfkit::PointCloud make_cloud(std::size_t n) {
  sfkit::Rng rng(4);
  sfkit::PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back({rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0),
                         rng.uniform(-2.0, 2.0)});
  }
  return pc;
}

const sfkit::GridSpec kGrid({-12, -12, -2}, {12, 12, 2}, {0.3, 0.3, 0.25});

void BM_Voxelize(benchmark::State& state) {
  const auto pc = make_cloud(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sfkit::voxelize(pc, kGrid));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Voxelize)->Range(1 << 12, 1 << 16);

void BM_DownsampleContinuous(benchmark::State& state) {
  const auto vs = sfkit::voxelize(make_cloud(state.range(0)), kGrid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sfkit::downsample_voxels(vs, {2, 2, 2}, sfkit::CentroidMode::Continuous));
  }
  state.SetItemsProcessed(state.iterations() * vs.size());
}
BENCHMARK(BM_DownsampleContinuous)->Range(1 << 12, 1 << 16);

}  // namespace
