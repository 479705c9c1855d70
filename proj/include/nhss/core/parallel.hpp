#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace nhss {

namespace detail {
inline std::atomic<std::size_t>& thread_count() {
  static std::atomic<std::size_t> n{1};
  return n;
}
}  // namespace detail

/// Worker threads used by sample-parallel loops. Results never depend on it:
/// every parallel loop writes disjoint per-index outputs.
inline void set_threads(std::size_t n) { detail::thread_count() = std::max<std::size_t>(1, n); }
inline std::size_t threads() { return detail::thread_count(); }

/// Calls f(begin, end) over contiguous chunks of [0, n).
template <class F>
void parallel_chunks(std::size_t n, F&& f) {
  const std::size_t t = std::min(threads(), n);
  if (t <= 1) {
    f(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t step = (n + t - 1) / t;
  for (std::size_t lo = 0; lo < n; lo += step) pool.emplace_back([&f, lo, hi = std::min(n, lo + step)] { f(lo, hi); });
  for (auto& th : pool) th.join();
}

}  // namespace nhss
