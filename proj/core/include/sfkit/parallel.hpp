#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace sfkit {

/// Worker count from SFKIT_WORKERS, default 1.
inline int env_workers() {
  const char* raw = std::getenv("SFKIT_WORKERS");
  if (raw == nullptr) return 1;
  const int n = std::atoi(raw);
  return n >= 1 ? n : 1;
}

/// Runs fn(i) for i in [0, count). Each index must touch disjoint state;
/// the stripe split is fixed, so results cannot depend on worker count.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t n_threads = std::min<std::size_t>(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += n_threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sfkit
