#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace afl::harness {

// Runs job(0) .. job(count - 1) on at most `workers` threads (0 = hardware
// concurrency). If jobs throw, the exception of the lowest failing index is
// rethrown after all threads finish, so failures do not depend on timing.
class ParallelRunner {
 public:
  explicit ParallelRunner(std::size_t workers = 0)
      : workers_(workers == 0 ? std::max(1u, std::thread::hardware_concurrency())
                              : workers) {}

  std::size_t workers() const noexcept { return workers_; }

  template <typename Job>
  void operator()(std::size_t count, const Job& job) const {
    const std::size_t threads = std::min(workers_, count);
    if (threads <= 1) {
      for (std::size_t i = 0; i < count; ++i) job(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = count;
    std::exception_ptr failure;
    auto worker = [&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
  }

 private:
  std::size_t workers_;
};

}  // namespace afl::harness
