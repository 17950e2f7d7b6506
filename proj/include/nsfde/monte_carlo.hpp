#pragma once

// Path-level parallelism with deterministic aggregation: workers fill
// per-path slots keyed by path_id, reductions run afterwards in fixed path
// order, so (config, seed) -> output is a pure function of the inputs and
// independent of the worker count.

#include <nsfde/common.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nsfde {

inline unsigned worker_count_from_env(unsigned fallback = 0) {
  if (const char* env = std::getenv("NSFDE_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  if (fallback >= 1) return fallback;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? hw : 1;
}

/// Calls body(path_id) once for every path_id in [0, paths). Exceptions are
/// rethrown on the caller thread (first one wins).
template <class Body>
void parallel_paths(std::uint64_t paths, unsigned workers, const Body& body) {
  if (workers <= 1 || paths <= 1) {
    for (std::uint64_t p = 0; p < paths; ++p) body(p);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::uint64_t p = next.fetch_add(1);
      if (p >= paths || failed.load(std::memory_order_relaxed)) return;
      try {
        body(p);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(
      std::min<std::uint64_t>(workers, paths));
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Wilson score interval at 95% confidence for s successes in n trials.
struct WilsonInterval {
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline WilsonInterval wilson95(std::uint64_t successes, std::uint64_t n) {
  WilsonInterval w;
  if (n == 0) return w;
  constexpr double z = 1.959963984540054;  // 97.5% normal quantile
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  w.p = phat;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

}  // namespace nsfde
