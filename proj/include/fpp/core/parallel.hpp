#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fpp {

namespace detail {
inline std::atomic<int>& thread_limit_storage() {
  static std::atomic<int> limit{1};
  return limit;
}

inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Global cap on worker threads used by the row-parallel kernels.
/// 0 selects std::thread::hardware_concurrency(). Default is 1 (serial).
inline void set_thread_limit(int threads) { detail::thread_limit_storage().store(std::max(threads, 0)); }

inline int thread_limit() {
  int n = detail::thread_limit_storage().load();
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

/// Calls fn(begin, end) over disjoint contiguous chunks of [0, count).
/// Results must not depend on the partitioning; every caller writes only to
/// the rows it was handed. Nested calls run serially on the calling worker.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = detail::inside_parallel_region() ? 1 : std::min(thread_limit(), std::max(count, 1));
  if (workers <= 1 || count < 2) {
    if (count > 0) fn(0, count);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    pool.emplace_back([&, begin, end] {
      detail::inside_parallel_region() = true;
      try {
        if (begin < end) fn(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fpp
