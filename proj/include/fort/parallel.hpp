#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace fort {

// Runs fn(i) for i in [0, n) on `workers` threads (0 = hardware count).
// Tasks must write only to per-index slots; the caller aggregates in index
// order afterwards, so results never depend on scheduling.
inline void parallel_for(long n, int workers,
                         const std::function<void(long)>& fn) {
  if (workers <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    workers = hw == 0 ? 1 : static_cast<int>(hw);
  }
  if (workers == 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  auto worker = [&]() {
    while (true) {
      long i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min<long>(workers, n);
  pool.reserve(static_cast<size_t>(spawn));
  for (int k = 0; k < spawn; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace fort
