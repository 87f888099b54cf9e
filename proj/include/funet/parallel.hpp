#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace funet {

// Worker count for kernel-internal parallelism. Defaults to 1 (fully
// deterministic ordering); FUNET_THREADS raises the cap. Parallel loops
// only ever split disjoint output ranges, so results are identical for
// any thread count.
inline int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("FUNET_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    return 1;
  }();
  return n;
}

template <class Fn>
void parallel_for(std::int64_t begin, std::int64_t end, const Fn& fn) {
  const std::int64_t total = end - begin;
  const int nt = thread_count();
  if (nt <= 1 || total < 2) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const int workers = int(std::min<std::int64_t>(nt, total));
  std::vector<std::thread> threads;
  threads.reserve(size_t(workers));
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = begin + total * t / workers;
    const std::int64_t hi = begin + total * (t + 1) / workers;
    threads.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace funet
