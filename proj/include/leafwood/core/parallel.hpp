#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace leafwood {

/// Runs fn(begin, end) over contiguous chunks of [0, count) on up to
/// `threads` workers. With threads <= 1 it degenerates to a plain call, and
/// chunk boundaries do not depend on the thread count a worker happens to
/// get, so workloads that write to disjoint slots stay deterministic.
inline void parallel_chunks(std::size_t count, unsigned threads,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  if (count == 0) return;
  threads = std::max(1u, std::min<unsigned>(threads, unsigned(count)));
  if (threads == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::size_t(t) * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace leafwood
