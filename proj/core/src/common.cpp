#include "psag/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace psag {

namespace {

std::atomic<int> g_thread_count{0};

int detect_threads() {
  if (const char* env = std::getenv("PSAG_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

int thread_count() {
  int n = g_thread_count.load(std::memory_order_relaxed);
  if (n <= 0) {
    n = detect_threads();
    g_thread_count.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_thread_count(int n) { g_thread_count.store(n, std::memory_order_relaxed); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn) {
  if (n <= 0) return;
  const int workers = std::min<std::int64_t>(thread_count(), n);
  if (workers <= 1) {
    chunk_fn(0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
    if (lo >= hi) break;
    pool.emplace_back([&chunk_fn, lo, hi] { chunk_fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace psag
