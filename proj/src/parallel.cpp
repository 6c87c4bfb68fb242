#include "matchdb/parallel.hpp"

#include <atomic>

namespace matchdb {

namespace {
std::atomic<std::size_t> g_threads{0};

constexpr std::size_t kLeaf = 16;
}  // namespace

void set_threads(std::size_t n) { g_threads.store(n); }

std::size_t threads() {
  std::size_t n = g_threads.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace matchdb
