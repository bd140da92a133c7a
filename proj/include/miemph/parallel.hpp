#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace miemph {

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(worker, i) for i in [0, n) across up to n_threads workers; item
// i goes to worker i % workers. Work items must write to disjoint state;
// reductions happen at the call site in index order, so results never
// depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t n_threads, Fn&& fn) {
  n_threads = resolve_threads(n_threads);
  const std::size_t workers = n_threads < n ? n_threads : (n ? n : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(std::size_t{0}, i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) fn(t, i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace miemph
