#pragma once

#include <condition_variable>
#include <cstdint>
#include <mutex>

#include "uavnet/core/clock.hpp"

namespace uavnet {

/// Wakes a task that consumes several inputs (a poll set).
class Notifier {
 public:
  void notify() {
    {
      std::lock_guard lk(mu_);
      ++generation_;
    }
    cv_.notify_all();
  }

  /// Blocks until notified after `seen` or until the deadline passes. Only
  /// wall clocks block; a logical clock returns at once. Returns the current
  /// generation.
  std::uint64_t wait(std::uint64_t seen, const Clock& clock, Nanos deadline) {
    std::unique_lock lk(mu_);
    if (const auto* wall = dynamic_cast<const WallClock*>(&clock)) {
      cv_.wait_until(lk, wall->to_time_point(deadline), [&] { return generation_ != seen; });
    }
    return generation_;
  }

  std::uint64_t generation() const {
    std::lock_guard lk(mu_);
    return generation_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
};

}  // namespace uavnet
