#include "misbind/clock.hpp"

#include <numeric>
#include <thread>

namespace misbind {

Clock::TimePoint SteadyClock::now() { return std::chrono::steady_clock::now(); }

void SteadyClock::sleep_for(std::chrono::milliseconds duration) {
  std::this_thread::sleep_for(duration);
}

Clock::TimePoint VirtualClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void VirtualClock::sleep_for(std::chrono::milliseconds duration) {
  std::lock_guard lock(mutex_);
  now_ += duration;
  sleeps_.push_back(duration);
}

void VirtualClock::advance(std::chrono::milliseconds duration) {
  std::lock_guard lock(mutex_);
  now_ += duration;
}

std::vector<std::chrono::milliseconds> VirtualClock::sleeps() const {
  std::lock_guard lock(mutex_);
  return sleeps_;
}

std::chrono::milliseconds VirtualClock::total_slept() const {
  std::lock_guard lock(mutex_);
  return std::accumulate(sleeps_.begin(), sleeps_.end(),
                         std::chrono::milliseconds{0});
}

}  // namespace misbind
