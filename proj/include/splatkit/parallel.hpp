// Copyright Contributors to the splatkit project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace splat {

// Runs fn(worker_id, begin, end) over contiguous chunks of [0, count).
// With workers <= 1 everything runs inline on the calling thread, which is
// the reproducibility reference mode.
inline void parallel_chunks(int count, int workers,
                            const std::function<void(int, int, int)>& fn) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    fn(0, 0, count);
    return;
  }
  const int n = std::min(workers, count);
  std::vector<std::thread> threads;
  threads.reserve(n);
  const int chunk = (count + n - 1) / n;
  for (int w = 0; w < n; ++w) {
    const int begin = w * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back(fn, w, begin, end);
  }
  for (auto& t : threads) t.join();
}

}  // namespace splat
