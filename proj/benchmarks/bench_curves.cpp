#include <benchmark/benchmark.h>

#include "sfkit/curves.hpp"
#include "sfkit/rng.hpp"

namespace {

void BM_HilbertIndex(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  sfkit::Rng rng(3);
  std::vector<std::array<std::uint32_t, 3>> coords(4096);
  for (auto& c : coords) {
    for (auto& v : c) v = static_cast<std::uint32_t>(rng.uniform_index(1u << bits));
  }
  for (auto _ : state) {
    std::uint64_t acc = 0;
    for (const auto& c : coords) acc ^= sfkit::hilbert_index(c[0], c[1], c[2], bits);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * coords.size());
}
BENCHMARK(BM_HilbertIndex)->Arg(4)->Arg(9)->Arg(16);

void BM_MortonIndex(benchmark::State& state) {
  const int bits = static_cast<int>(state.range(0));
  sfkit::Rng rng(3);
  std::vector<std::array<std::uint32_t, 3>> coords(4096);
  for (auto& c : coords) {
    for (auto& v : c) v = static_cast<std::uint32_t>(rng.uniform_index(1u << bits));
  }
  for (auto _ : state) {
    std::uint64_t acc = 0;
    for (const auto& c : coords) acc ^= sfkit::morton_index(c[0], c[1], c[2], bits);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * coords.size());
}
BENCHMARK(BM_MortonIndex)->Arg(4)->Arg(9)->Arg(16);

}  // namespace
