#include "uavnet/netsim/wifi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "uavnet/netsim/channel.hpp"

namespace uavnet::netsim {
namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

Nanos ceil_div(Nanos a, Nanos b) { return (a + b - 1) / b; }

}  // namespace

void WifiParams::validate() const {
  if (slot_ns <= 0 || difs_ns <= 0 || sifs_ns <= 0 || ack_ns <= 0)
    throw NetError("wifi timing constants must be > 0");
  if (cw_min < 1 || cw_max < cw_min) throw NetError("wifi cw_min/cw_max out of order");
  if (retry_limit < 0) throw NetError("wifi.retry_limit must be >= 0");
  if (rate_table.empty()) throw NetError("wifi.rate_table must not be empty");
  for (std::size_t i = 0; i < rate_table.size(); ++i) {
    if (!(rate_table[i].rate_mbps > 0.0)) throw NetError("wifi rates must be > 0");
    if (i > 0 && !(rate_table[i].min_rss_dbm < rate_table[i - 1].min_rss_dbm))
      throw NetError("wifi.rate_table thresholds must be strictly decreasing");
    if (i > 0 && !(rate_table[i].rate_mbps < rate_table[i - 1].rate_mbps))
      throw NetError("wifi.rate_table rates must be strictly decreasing");
  }
  if (queue_cap == 0) throw NetError("wifi.queue_cap must be > 0");
}

int WifiParams::cw(int stage) const {
  long w = static_cast<long>(cw_min) + 1;
  for (int i = 0; i < stage && w <= cw_max; ++i) w *= 2;
  return static_cast<int>(std::min<long>(w, static_cast<long>(cw_max) + 1) - 1);
}

std::optional<double> WifiParams::rate_for(double rss_dbm) const {
  if (rss_dbm < sensitivity_dbm) return std::nullopt;
  for (const auto& t : rate_table)
    if (rss_dbm >= t.min_rss_dbm) return t.rate_mbps;
  return std::nullopt;
}

Nanos tx_time_ns(std::size_t bytes, double rate_mbps) {
  return static_cast<Nanos>(std::llround(static_cast<double>(bytes) * 8.0 * 1e3 / rate_mbps));
}

DcfEngine::DcfEngine(WifiParams params, std::uint64_t seed) : params_(std::move(params)), rng_(seed) {
  params_.validate();
}

std::size_t DcfEngine::add_station(const StationSpec& spec) {
  if (!(spec.rate_mbps > 0.0)) throw NetError("station rate must be > 0");
  if (spec.frame_bytes == 0) throw NetError("station frame size must be > 0");
  Station s;
  s.spec = spec;
  if (!spec.saturated) {
    if (!(spec.offered_mbps > 0.0)) throw NetError("paced station needs offered_mbps > 0");
    s.interval = tx_time_ns(spec.frame_bytes, spec.offered_mbps);
    s.next_arrival = std::max(spec.active_from, now_);
  }
  stations_.push_back(s);
  return stations_.size() - 1;
}

void DcfEngine::set_station_rate(std::size_t idx, double rate_mbps) {
  if (!(rate_mbps > 0.0)) throw NetError("station rate must be > 0");
  stations_.at(idx).spec.rate_mbps = rate_mbps;
}

void DcfEngine::set_station_enabled(std::size_t idx, bool enabled) {
  stations_.at(idx).enabled = enabled;
}

const StationStats& DcfEngine::station_stats(std::size_t idx) const {
  return stations_.at(idx).stats;
}

double DcfEngine::busy_fraction() const {
  const Nanos span = now_ - start_;
  return span > 0 ? static_cast<double>(busy_ns_) / static_cast<double>(span) : 0.0;
}

void DcfEngine::draw(int& counter, int stage) {
  std::uniform_int_distribution<int> u(0, params_.cw(stage));
  counter = u(rng_);
}

bool DcfEngine::has_frame(const Station& s) const {
  if (!s.enabled || now_ < s.spec.active_from || now_ >= s.spec.active_until) return false;
  return s.spec.saturated || s.queue > 0;
}

void DcfEngine::admit_arrivals() {
  for (auto& s : stations_) {
    if (!s.spec.saturated && s.next_arrival <= now_) {
      const Nanos last = std::min(now_, s.spec.active_until - 1);
      if (s.next_arrival <= last) {
        const auto n = static_cast<std::size_t>((last - s.next_arrival) / s.interval) + 1;
        const std::size_t room = params_.queue_cap - s.queue;
        const std::size_t taken = s.enabled ? std::min(n, room) : 0;
        s.queue += taken;
        s.stats.queue_drops += n - taken;
        s.next_arrival += static_cast<Nanos>(n) * s.interval;
      } else {
        s.next_arrival = kNever;
      }
    }
    const bool ready = has_frame(s);
    if (ready && !s.backlogged) {
      s.stage = 0;
      draw(s.counter, 0);
    }
    s.backlogged = ready;
  }
}

Nanos DcfEngine::next_arrival_after_now() const {
  Nanos t = kNever;
  for (const auto& s : stations_) {
    if (!s.enabled || has_frame(s)) continue;
    if (s.spec.saturated) {
      if (s.spec.active_from > now_) t = std::min(t, s.spec.active_from);
    } else if (s.next_arrival > now_ && s.next_arrival < s.spec.active_until) {
      t = std::min(t, std::max(s.next_arrival, s.spec.active_from));
    }
  }
  return t;
}

void DcfEngine::after_tx(Station& s, bool success) {
  if (success) {
    ++s.stats.successes;
    s.stats.bytes_delivered += s.spec.frame_bytes;
  } else {
    ++s.stats.collisions;
    if (++s.stage <= params_.retry_limit) {
      draw(s.counter, s.stage);
      return;
    }
    ++s.stats.drops;
  }
  if (!s.spec.saturated) --s.queue;
  s.stage = 0;
  s.backlogged = has_frame(s);
  if (s.backlogged) draw(s.counter, 0);
}

bool DcfEngine::step(Nanos horizon) {
  if (now_ >= horizon) return false;
  admit_arrivals();

  int c_min = std::numeric_limits<int>::max();
  for (const auto& s : stations_)
    if (s.backlogged) c_min = std::min(c_min, s.counter);
  if (tag_active_) c_min = std::min(c_min, tag_counter_);

  if (c_min == std::numeric_limits<int>::max()) {
    // Medium idle with nobody contending: jump to the next arrival, which
    // must then sense the medium idle for DIFS.
    const Nanos t = next_arrival_after_now();
    if (t == kNever || t >= horizon) return false;
    now_ = t + params_.difs_ns;
    return true;
  }

  if (c_min > 0) {
    Nanos k = c_min;
    const Nanos t_arr = next_arrival_after_now();
    if (t_arr != kNever)
      k = std::min(k, std::max<Nanos>(1, ceil_div(t_arr + params_.difs_ns - now_, params_.slot_ns)));
    if (horizon != kNever)
      k = std::min(k, std::max<Nanos>(1, ceil_div(horizon - now_, params_.slot_ns)));
    for (auto& s : stations_)
      if (s.backlogged) s.counter -= static_cast<int>(k);
    if (tag_active_) tag_counter_ -= static_cast<int>(k);
    now_ += k * params_.slot_ns;
    slots_ += static_cast<std::uint64_t>(k);
    return true;
  }

  // Busy virtual slot.
  int n_tx = 0;
  Nanos longest = 0;
  for (const auto& s : stations_) {
    if (s.backlogged && s.counter == 0) {
      ++n_tx;
      longest = std::max(longest, tx_time_ns(s.spec.frame_bytes, s.spec.rate_mbps));
    }
  }
  const bool tag_tx = tag_active_ && tag_counter_ == 0;
  if (tag_tx) {
    ++n_tx;
    longest = std::max(longest, tx_time_ns(tag_bytes_, tag_rate_));
  }
  const bool success = n_tx == 1;
  const Nanos exchange = longest + params_.sifs_ns + params_.ack_ns;
  const Nanos t_start = now_;

  for (auto& s : stations_) {
    if (!s.backlogged) continue;
    if (s.counter == 0)
      after_tx(s, success);
    else
      --s.counter;
  }
  if (tag_active_) {
    if (tag_tx) {
      ++tag_result_.attempts;
      tag_result_.t_done = t_start + exchange;
      if (success) {
        tag_result_.delivered = true;
        tag_done_ = true;
        ++tagged_stats_.successes;
        tagged_stats_.bytes_delivered += tag_bytes_;
      } else {
        ++tagged_stats_.collisions;
        if (++tag_stage_ > params_.retry_limit) {
          tag_result_.reason = "retry-exhausted";
          tag_done_ = true;
          ++tagged_stats_.drops;
        } else {
          draw(tag_counter_, tag_stage_);
        }
      }
    } else {
      --tag_counter_;
    }
  }
  busy_ns_ += exchange;
  now_ = t_start + exchange + params_.difs_ns;
  ++slots_;
  return true;
}

void DcfEngine::run_until(Nanos t_end) {
  while (step(t_end)) {
  }
}

FrameResult DcfEngine::transmit(Nanos t_arr, std::size_t bytes, double rate_mbps) {
  if (bytes == 0 || !(rate_mbps > 0.0)) throw NetError("frame needs bytes > 0 and rate > 0");
  if (now_ < t_arr + params_.difs_ns) {
    // The frame senses the medium from t_arr; a transmission that starts
    // before its DIFS completes makes it defer to the end of that exchange.
    run_until(t_arr + params_.difs_ns);
    now_ = std::max(now_, t_arr + params_.difs_ns);
  }
  tag_active_ = true;
  tag_done_ = false;
  tag_rate_ = rate_mbps;
  tag_bytes_ = bytes;
  tag_stage_ = 0;
  tag_result_ = FrameResult{};
  tag_result_.t_join = now_;
  draw(tag_counter_, 0);
  while (!tag_done_) step(kNever);
  tag_active_ = false;
  return tag_result_;
}

}  // namespace uavnet::netsim
