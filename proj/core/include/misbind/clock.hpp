#pragma once

#include <chrono>
#include <mutex>
#include <vector>

namespace misbind {

/// Time source used by retry backoff and rate limiting. Production code uses
/// SteadyClock; tests swap in a VirtualClock so waits cost nothing.
class Clock {
 public:
  using TimePoint = std::chrono::steady_clock::time_point;

  virtual ~Clock() = default;
  virtual TimePoint now() = 0;
  virtual void sleep_for(std::chrono::milliseconds duration) = 0;
};

class SteadyClock final : public Clock {
 public:
  TimePoint now() override;
  void sleep_for(std::chrono::milliseconds duration) override;
};

/// Manual clock: sleep_for advances time instantly and records the request.
class VirtualClock final : public Clock {
 public:
  TimePoint now() override;
  void sleep_for(std::chrono::milliseconds duration) override;

  void advance(std::chrono::milliseconds duration);
  std::vector<std::chrono::milliseconds> sleeps() const;
  std::chrono::milliseconds total_slept() const;

 private:
  mutable std::mutex mutex_;
  TimePoint now_{};
  std::vector<std::chrono::milliseconds> sleeps_;
};

}  // namespace misbind
