#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace mapcover {

// Splits [0, n) into `threads` contiguous blocks and runs fn(begin, end) on
// each. Every element is written by exactly one block from read-only inputs,
// so results are bitwise identical for any thread count; reductions must stay
// serial for the same reason.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n < 2 * threads) {
    fn(std::int64_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads) - 1);
  for (int c = 1; c < threads; ++c) {
    std::int64_t b = n * c / threads;
    std::int64_t e = n * (c + 1) / threads;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::int64_t{0}, n / threads);
  for (auto& t : pool) t.join();
}

}  // namespace mapcover
