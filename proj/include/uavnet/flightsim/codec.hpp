#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "uavnet/flightsim/types.hpp"

namespace uavnet::flightsim {

/// Flat key-value telemetry record (JSON object), keys: uav_id, seq, lat,
/// lon, alt, vx, vy, vz, heading, battery_pct, mode, t_gen and, when the
/// record acknowledges a command, ack_cmd_id and ack ("ack" | "nack").
std::string encode_telemetry(const Telemetry& t);
/// Throws FlightError on malformed input.
Telemetry decode_telemetry(std::string_view text);

/// GCS-to-UAV uplink messages. Heartbeats carry no command and pad the
/// control stream.
struct Heartbeat {
  std::uint64_t seq = 0;
  Nanos t_gen = 0;
};
using Uplink = std::variant<Command, Heartbeat>;

std::string encode_command(const Command& c);
std::string encode_heartbeat(const Heartbeat& h, std::size_t pad_to = 0);
/// Throws FlightError on malformed input.
Uplink decode_uplink(std::string_view text);

}  // namespace uavnet::flightsim

namespace uavnet::flightsim {

/// Control message on the freeze topic.
struct FreezeSignal {
  bool frozen = true;
  Nanos t_ns = 0;
  Nanos pause_ns = 0;  // resume only
};

std::string encode_freeze(const FreezeSignal& s);
FreezeSignal decode_freeze(std::string_view text);

}  // namespace uavnet::flightsim
