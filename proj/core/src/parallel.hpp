#pragma once

// Bounded fan-out helper for backend calls. Results land at their input
// index, so persisted order never depends on completion order. Not installed.

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace misbind::detail {

inline void parallel_for(std::size_t count, int fan_out,
                         const std::function<void(std::size_t)>& fn) {
  if (fan_out <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(fan_out), count);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) {
            return;
          }
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(count);  // stop claiming new work
      }
    });
  }
  for (auto& thread : threads) {
    thread.join();
  }
  for (const auto& error : errors) {
    if (error) {
      std::rethrow_exception(error);
    }
  }
}

}  // namespace misbind::detail
