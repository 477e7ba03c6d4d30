#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace oggbn {

// Runs fn(i) for i in [0,n) over contiguous chunks; the calling thread takes
// the first chunk. workers <= 1 runs inline. Results must not depend on the
// partition: fn may only write i-owned slots or integer atomics, and every
// random draw inside must come from a stream addressed by i, not by thread.
// The first exception thrown by any chunk is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w =
      std::min<std::size_t>(workers < 1 ? 1 : static_cast<std::size_t>(workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + w - 1) / w;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto run_range = [&](std::size_t b, std::size_t e) {
    try {
      for (std::size_t i = b; i < e && !failed.load(std::memory_order_relaxed);
           ++i)
        fn(i);
    } catch (...) {
      if (!failed.exchange(true)) err = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t t = 1; t < w; ++t) {
    const std::size_t b = t * chunk;
    if (b >= n) break;
    pool.emplace_back(run_range, b, std::min(n, b + chunk));
  }
  run_range(0, std::min(chunk, n));
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Exact integer accumulation that any thread may target.
inline void atomic_add(std::uint64_t& slot, std::uint64_t v) {
  std::atomic_ref<std::uint64_t>(slot).fetch_add(v, std::memory_order_relaxed);
}

}  // namespace oggbn
