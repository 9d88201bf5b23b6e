#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace recon {

inline int default_workers() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls body(i) for i in [0, count). Each index is handled exactly once and
/// callers write into per-index slots, so results do not depend on the worker
/// count. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  if (workers <= 0) workers = default_workers();
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += nthreads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace recon
