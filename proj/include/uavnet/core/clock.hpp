#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace uavnet {

/// Nanoseconds. Wall-clock values are relative to the owning clock's epoch.
using Nanos = std::int64_t;

constexpr Nanos kNsPerUs = 1'000;
constexpr Nanos kNsPerMs = 1'000'000;
constexpr Nanos kNsPerSec = 1'000'000'000;

constexpr double ns_to_ms(Nanos ns) { return static_cast<double>(ns) / 1e6; }
constexpr double ns_to_s(Nanos ns) { return static_cast<double>(ns) / 1e9; }
constexpr Nanos s_to_ns(double s) { return static_cast<Nanos>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)); }
constexpr Nanos ms_to_ns(double ms) { return static_cast<Nanos>(ms * 1e6 + (ms >= 0 ? 0.5 : -0.5)); }

/// Time source shared by every component of a run.
///
/// In real-time mode this is the host steady clock; in logical-time mode it
/// is a manually advanced counter so that every timestamp written to a
/// trace is a scheduled time and runs are reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Nanos now() const = 0;
  virtual bool is_logical() const = 0;
};

class WallClock final : public Clock {
 public:
  WallClock() : epoch_(std::chrono::steady_clock::now()) {}

  Nanos now() const override {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now() - epoch_)
        .count();
  }
  bool is_logical() const override { return false; }

  std::chrono::steady_clock::time_point to_time_point(Nanos t) const {
    return epoch_ + std::chrono::nanoseconds(t);
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Nanos start = 0) : now_(start) {}

  Nanos now() const override { return now_.load(std::memory_order_acquire); }
  bool is_logical() const override { return true; }

  void set(Nanos t) { now_.store(t, std::memory_order_release); }
  void advance(Nanos dt) { now_.fetch_add(dt, std::memory_order_acq_rel); }

 private:
  std::atomic<Nanos> now_;
};

}  // namespace uavnet
