// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace qfw {

// Number of worker threads: QFF_THREADS if set, else hardware concurrency.
inline int thread_budget() {
  if (const char* env = std::getenv("QFF_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
// claimed from a shared counter; results must not depend on claim order
// (callers reduce into per-item or per-chunk slots and combine in fixed order).
inline void parallel_for(int count, const std::function<void(int)>& fn, int threads = -1) {
  if (threads < 0) threads = thread_budget();
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error = nullptr;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace qfw
