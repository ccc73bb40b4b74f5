#ifndef TAILMEM_PARALLEL_H_
#define TAILMEM_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tailmem {

// Runs `body(r)` for r in [0, count) on `parallelism` threads. The first
// failure stops the remaining work and is rethrown as
// "<unit> <index> failed: ...".
template <typename Body>
void ParallelFor(uint64_t count, int parallelism, const char* unit, Body body) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::atomic<uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  uint64_t error_index = 0;
  const auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const uint64_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error || r < error_index) {
          error = std::current_exception();
          error_index = r;
        }
        failed = true;
      }
    }
  };
  const int threads = static_cast<int>(std::min<uint64_t>(parallelism, std::max<uint64_t>(count, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(unit) + " " + std::to_string(error_index) + " failed: " + e.what());
    }
  }
}

}  // namespace tailmem

#endif  // TAILMEM_PARALLEL_H_
