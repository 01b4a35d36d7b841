#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <vector>

#include "uavnet/flightsim/types.hpp"

namespace uavnet::gcs {

class GcsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CmdStatus { Pending, Ack, Nack };
const char* to_string(CmdStatus s);

struct CommandRecord {
  int uav_id = 0;
  std::uint64_t cmd_id = 0;
  flightsim::Command cmd;
  CmdStatus status = CmdStatus::Pending;
  Nanos t_issue = 0;
  Nanos t_status = 0;  // when the ack/nack arrived
  std::uint64_t ack_seq = 0;
};

/// Latest telemetry, a seq-ordered ring of the last K records, and the
/// command history per UAV. Single writer, snapshot readers.
class TelemetryStore {
 public:
  explicit TelemetryStore(std::size_t capacity = 1000);

  /// Returns false for a duplicate seq (ignored).
  bool ingest(const flightsim::Telemetry& t);
  std::optional<flightsim::Telemetry> latest(int uav_id) const;
  std::vector<flightsim::Telemetry> history(int uav_id) const;
  std::vector<int> uav_ids() const;

  void add_command(const CommandRecord& rec);
  /// Records a terminal status; returns false for an unknown cmd_id.
  bool resolve(std::uint64_t cmd_id, CmdStatus status, Nanos t, std::uint64_t ack_seq);
  std::optional<CommandRecord> command(std::uint64_t cmd_id) const;
  std::vector<CommandRecord> commands(int uav_id) const;
  std::vector<CommandRecord> all_commands() const;

 private:
  std::size_t capacity_;
  mutable std::shared_mutex mu_;
  std::map<int, std::deque<flightsim::Telemetry>> ring_;
  std::map<std::uint64_t, CommandRecord> commands_;
};

}  // namespace uavnet::gcs
