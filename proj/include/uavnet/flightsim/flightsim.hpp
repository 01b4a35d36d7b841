#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "uavnet/bus/bus.hpp"
#include "uavnet/flightsim/codec.hpp"
#include "uavnet/flightsim/vehicle.hpp"

namespace uavnet::flightsim {

/// Runs a fleet of vehicles against a clock. Each vehicle is a separate task
/// with its own bus endpoint, command inbox and telemetry outbox; one
/// executor calls service() whenever a tick is due or an inbox has input.
class FlightSim {
 public:
  using TelemetryHook = std::function<void(const Telemetry&, const UavState&)>;
  using UplinkHook = std::function<void(const bus::Envelope&)>;

  FlightSim(const Clock& clock, bus::Bus& bus, VehicleParams params = {});
  ~FlightSim();

  /// Throws FlightError on a duplicate id or an invalid home.
  const Vehicle& spawn_uav(int uav_id, const geo::GeoPos& home);

  /// Schedules the first tick at `t_start` and publishes an initial report
  /// for every vehicle.
  void start(Nanos t_start);

  /// Applies freeze control, commands and every tick due at `now`.
  /// Returns true when anything was processed.
  bool service(Nanos now);

  /// Next tick time; INT64 max while frozen or before start.
  Nanos next_due() const;

  /// Signalled on command or freeze input.
  std::shared_ptr<bus::Notifier> notifier() const { return notifier_; }

  bool frozen() const { return frozen_; }
  Nanos frozen_total() const { return frozen_total_; }
  std::uint64_t ticks() const { return ticks_; }
  int freeze_count() const { return freeze_count_; }
  std::size_t size() const { return tasks_.size(); }
  std::vector<int> ids() const;
  const Vehicle& vehicle(int uav_id) const;

  void set_telemetry_hook(TelemetryHook h) { on_telemetry_ = std::move(h); }
  /// Invoked for every uplink envelope before it is decoded.
  void set_uplink_hook(UplinkHook h) { on_uplink_ = std::move(h); }

  std::uint64_t commands_received() const { return commands_; }
  std::uint64_t heartbeats_received() const { return heartbeats_; }
  std::uint64_t malformed_received() const { return malformed_; }

 private:
  struct Task {
    Vehicle vehicle;
    std::shared_ptr<bus::Endpoint> endpoint;
    std::shared_ptr<bus::Subscription> inbox;
    std::string topic;
    std::optional<Snapshot> snapshot;
  };

  void publish(Task& t, const Telemetry& tel);
  void drain_inbox(Task& t, Nanos now);
  void tick(Nanos t_tick);
  void freeze_all(Nanos t);
  void resume_all(Nanos t, Nanos pause);

  const Clock& clock_;
  bus::Bus& bus_;
  VehicleParams params_;
  std::map<int, std::unique_ptr<Task>> tasks_;
  std::shared_ptr<bus::Endpoint> control_;
  std::shared_ptr<bus::Subscription> freeze_inbox_;
  std::shared_ptr<bus::Notifier> notifier_;
  std::vector<FreezeSignal> pending_signals_;
  TelemetryHook on_telemetry_;
  UplinkHook on_uplink_;
  Nanos tick_ns_;
  Nanos next_tick_;
  bool started_ = false;
  bool frozen_ = false;
  Nanos frozen_at_ = 0;
  Nanos frozen_total_ = 0;
  std::uint64_t ticks_ = 0;
  int freeze_count_ = 0;
  std::uint64_t commands_ = 0;
  std::uint64_t heartbeats_ = 0;
  std::uint64_t malformed_ = 0;
};

}  // namespace uavnet::flightsim
