#include "uavnet/gcs/store.hpp"

#include <algorithm>
#include <mutex>

namespace uavnet::gcs {

const char* to_string(CmdStatus s) {
  switch (s) {
    case CmdStatus::Pending: return "pending";
    case CmdStatus::Ack: return "ack";
    case CmdStatus::Nack: return "nack";
  }
  return "?";
}

TelemetryStore::TelemetryStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw GcsError("telemetry ring capacity must be > 0");
}

bool TelemetryStore::ingest(const flightsim::Telemetry& t) {
  std::unique_lock lk(mu_);
  auto& ring = ring_[t.uav_id];
  // Network jitter can reorder records; keep the ring sorted by seq.
  auto pos = std::upper_bound(ring.begin(), ring.end(), t.seq,
                              [](std::uint64_t s, const flightsim::Telemetry& x) { return s < x.seq; });
  if (pos != ring.begin() && std::prev(pos)->seq == t.seq) return false;
  if (ring.size() == capacity_ && pos == ring.begin()) return false;  // older than the window
  ring.insert(pos, t);
  if (ring.size() > capacity_) ring.pop_front();
  return true;
}

std::optional<flightsim::Telemetry> TelemetryStore::latest(int uav_id) const {
  std::shared_lock lk(mu_);
  auto it = ring_.find(uav_id);
  if (it == ring_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::vector<flightsim::Telemetry> TelemetryStore::history(int uav_id) const {
  std::shared_lock lk(mu_);
  auto it = ring_.find(uav_id);
  if (it == ring_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<int> TelemetryStore::uav_ids() const {
  std::shared_lock lk(mu_);
  std::vector<int> out;
  for (const auto& [id, r] : ring_) out.push_back(id);
  return out;
}

void TelemetryStore::add_command(const CommandRecord& rec) {
  std::unique_lock lk(mu_);
  if (!commands_.emplace(rec.cmd_id, rec).second)
    throw GcsError("duplicate cmd_id " + std::to_string(rec.cmd_id));
}

bool TelemetryStore::resolve(std::uint64_t cmd_id, CmdStatus status, Nanos t,
                             std::uint64_t ack_seq) {
  std::unique_lock lk(mu_);
  auto it = commands_.find(cmd_id);
  if (it == commands_.end()) return false;
  if (it->second.status == CmdStatus::Pending) {
    it->second.status = status;
    it->second.t_status = t;
    it->second.ack_seq = ack_seq;
  }
  return true;
}

std::optional<CommandRecord> TelemetryStore::command(std::uint64_t cmd_id) const {
  std::shared_lock lk(mu_);
  auto it = commands_.find(cmd_id);
  if (it == commands_.end()) return std::nullopt;
  return it->second;
}

std::vector<CommandRecord> TelemetryStore::commands(int uav_id) const {
  std::shared_lock lk(mu_);
  std::vector<CommandRecord> out;
  for (const auto& [id, c] : commands_)
    if (c.uav_id == uav_id) out.push_back(c);
  return out;
}

std::vector<CommandRecord> TelemetryStore::all_commands() const {
  std::shared_lock lk(mu_);
  std::vector<CommandRecord> out;
  for (const auto& [id, c] : commands_) out.push_back(c);
  return out;
}

}  // namespace uavnet::gcs
