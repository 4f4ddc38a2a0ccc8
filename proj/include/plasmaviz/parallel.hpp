#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace plasmaviz {

// Number of workers to use when the caller passes 0.
inline unsigned default_workers() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

// Splits [begin, end) into at most `workers` contiguous chunks and runs
// fn(chunk_begin, chunk_end) on each, one thread per chunk. The first
// exception thrown by any chunk is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, unsigned workers, Fn&& fn) {
  if (end <= begin) return;
  const std::size_t total = end - begin;
  if (workers == 0) workers = default_workers();
  const std::size_t chunks = std::min<std::size_t>(workers, total);
  if (chunks <= 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> threads;
  threads.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = begin + total * c / chunks;
    const std::size_t hi = begin + total * (c + 1) / chunks;
    threads.emplace_back([&, c, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace plasmaviz
