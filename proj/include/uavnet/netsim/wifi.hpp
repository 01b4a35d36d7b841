#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavnet/core/clock.hpp"
#include "uavnet/core/rng.hpp"

namespace uavnet::netsim {

struct RateTier {
  double min_rss_dbm;
  double rate_mbps;
};

/// 802.11a/g-style DCF timing and the adaptive rate table.
struct WifiParams {
  Nanos slot_ns = 9 * kNsPerUs;
  Nanos difs_ns = 34 * kNsPerUs;
  Nanos sifs_ns = 16 * kNsPerUs;
  Nanos ack_ns = 44 * kNsPerUs;
  int cw_min = 15;
  int cw_max = 1023;
  int retry_limit = 7;
  std::vector<RateTier> rate_table{{-65.0, 54.0}, {-72.0, 36.0}, {-82.0, 18.0}, {-92.0, 6.0}};
  double sensitivity_dbm = -92.0;
  std::size_t queue_cap = 64;

  void validate() const;
  /// Contention window at backoff stage `stage`.
  int cw(int stage) const;
  /// Highest tier whose threshold the RSS meets; nullopt below every tier.
  std::optional<double> rate_for(double rss_dbm) const;
};

/// Serialization time of `bytes` at `rate_mbps`, rounded to the nearest ns.
Nanos tx_time_ns(std::size_t bytes, double rate_mbps);

/// Outcome of one frame handed to the engine.
struct FrameResult {
  bool delivered = false;
  Nanos t_join = 0;      // when the frame started contending
  Nanos t_done = 0;      // end of the ACK, or of the last failed attempt
  int attempts = 0;
  std::string reason;    // "retry-exhausted" when not delivered
};

/// Per-station counters reported by the engine.
struct StationStats {
  std::uint64_t successes = 0;
  std::uint64_t collisions = 0;
  std::uint64_t drops = 0;          // retry exhaustion
  std::uint64_t queue_drops = 0;    // arrivals refused by a full queue
  std::uint64_t bytes_delivered = 0;
};

/// Shared-medium DCF engine over virtual slots.
///
/// Every contending station holds a backoff counter. A counter at zero
/// transmits; all other contenders decrement once per virtual slot, idle or
/// busy. One transmitter succeeds and occupies the medium for
/// T_tx + SIFS + ACK + DIFS; several transmitters collide for the longest
/// T_tx + SIFS + ACK + DIFS, and each collider moves to the next backoff
/// stage, dropping the frame after retry_limit retransmissions.
///
/// Background stations are either saturated (always backlogged) or paced
/// (one frame every bytes·8/rate, queue capped). Foreground frames are
/// served one at a time in submission order by a single tagged station.
class DcfEngine {
 public:
  struct StationSpec {
    double rate_mbps = 54.0;
    std::size_t frame_bytes = 1000;
    bool saturated = true;
    double offered_mbps = 0.0;  // paced only
    Nanos active_from = 0;
    Nanos active_until = INT64_MAX;
  };

  DcfEngine(WifiParams params, std::uint64_t seed);

  /// Adds a background station; returns its index.
  std::size_t add_station(const StationSpec& spec);
  void set_station_rate(std::size_t idx, double rate_mbps);
  /// Suspends or restores a background station (e.g. outside sensing range).
  void set_station_enabled(std::size_t idx, bool enabled);
  std::size_t station_count() const { return stations_.size(); }
  const StationStats& station_stats(std::size_t idx) const;

  /// Sends one foreground frame that becomes ready at `t_arr`. The frame
  /// contends from max(t_arr + DIFS, medium free) and the engine advances
  /// until it is acknowledged or dropped.
  FrameResult transmit(Nanos t_arr, std::size_t bytes, double rate_mbps);

  /// Runs background stations only, until `t_end`.
  void run_until(Nanos t_end);

  /// Medium time: the instant the engine has simulated up to.
  Nanos now() const { return now_; }
  const StationStats& tagged_stats() const { return tagged_stats_; }
  /// Fraction of simulated time the medium carried frames.
  double busy_fraction() const;
  std::uint64_t virtual_slots() const { return slots_; }

 private:
  struct Station {
    StationSpec spec;
    bool enabled = true;
    bool backlogged = false;
    std::size_t queue = 0;
    Nanos next_arrival = 0;
    Nanos interval = 0;
    int counter = 0;
    int stage = 0;
    int retries = 0;
    StationStats stats;
  };

  void admit_arrivals();
  Nanos next_arrival_after_now() const;
  void draw(int& counter, int stage);
  bool has_frame(const Station& s) const;
  void after_tx(Station& s, bool success);
  /// One step of the contention process; returns false when the medium
  /// stayed idle because nothing is ready.
  bool step(Nanos horizon);

  WifiParams params_;
  Rng rng_;
  std::vector<Station> stations_;
  Nanos now_ = 0;
  Nanos start_ = 0;
  Nanos busy_ns_ = 0;
  std::uint64_t slots_ = 0;

  // Foreground frame state while transmit() runs.
  bool tag_active_ = false;
  bool tag_done_ = false;
  double tag_rate_ = 54.0;
  std::size_t tag_bytes_ = 0;
  int tag_counter_ = 0;
  int tag_stage_ = 0;
  FrameResult tag_result_;
  StationStats tagged_stats_;
};

}  // namespace uavnet::netsim
