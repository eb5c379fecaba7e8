#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace lcpnp {

/// Worker cap: LC_PNP_THREADS when set (minimum 1), hardware concurrency
/// otherwise.
inline int worker_count() {
  if (const char* env = std::getenv("LC_PNP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [0, n) across worker threads. Each task must touch
/// only its own output slot; the result is then independent of the worker
/// count and scheduling.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([=, &fn] {
      for (int i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lcpnp
