#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace geomgate {

// GEOMGATE_JOBS overrides the hardware thread count
inline int default_jobs() {
  if (const char* env = std::getenv("GEOMGATE_JOBS")) {
    try {
      const int j = std::stoi(env);
      if (j > 0) return j;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline int resolve_jobs(int jobs) { return jobs > 0 ? jobs : default_jobs(); }

// runs f(i) for i in [0, n); each task owns its output slot so results do not depend on scheduling
template <class F>
void parallel_for(std::size_t n, F&& f, int jobs = 0) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_jobs(jobs)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace geomgate
