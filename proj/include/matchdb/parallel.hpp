#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace matchdb {

// Worker count used by internal parallel loops. 0 restores the default
// (hardware concurrency).
void set_threads(std::size_t n);
std::size_t threads();

// Runs body(begin, end) over a static split of [0, n). The split depends
// only on n and the thread count, and every chunk writes disjoint output,
// so results never depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1024) {
  std::size_t workers = std::min(threads(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

// Sum with a fixed pairwise association order.
double pairwise_sum(std::span<const double> values);

}  // namespace matchdb
