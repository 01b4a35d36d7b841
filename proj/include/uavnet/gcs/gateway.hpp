#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "uavnet/flightsim/types.hpp"
#include "uavnet/gcs/ground_station.hpp"

namespace uavnet::gcs {

/// Decodes the "cmd" object of an inbound command message. Throws GcsError
/// naming the missing or invalid field.
flightsim::Command parse_command_json(const nlohmann::json& cmd);

/// WebSocket endpoint for UI sessions. Every session receives the same
/// broadcasts, optionally filtered by a subscribe message; inbound commands
/// go to the ground station.
class Gateway {
 public:
  /// Handler for {"type":"control","action":...}; returns false to reject.
  using ControlHandler = std::function<bool(const std::string& action)>;

  /// Installs itself as the ground station's event sink.
  Gateway(GroundStation& gcs, std::string address = "127.0.0.1", std::uint16_t port = 0);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and starts the I/O thread. Throws GcsError when the bind fails.
  void start();
  void stop();
  /// Bound port; valid after start().
  std::uint16_t port() const;

  /// Thread-safe fan-out to every session subscribed to ev["type"].
  void broadcast(const nlohmann::json& ev);
  void set_control_handler(ControlHandler h);

  std::size_t session_count() const;
  std::uint64_t commands_accepted() const;
  std::uint64_t errors_sent() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace uavnet::gcs
