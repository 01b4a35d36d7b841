#pragma once

#include <optional>

#include "uavnet/flightsim/types.hpp"

namespace uavnet::flightsim {

/// Integrator state beyond the public UavState. Snapshots copy all of it.
struct Guidance {
  geo::LocalXY target;
  bool has_target = false;
  double speed_limit = 5.0;
  geo::LocalXY cmd_start;
  std::optional<Command> active;
  std::uint64_t next_seq = 1;
  geo::LocalXY last_emit_pos;
  Mode last_emit_mode = Mode::Disarmed;
  int last_emit_battery_floor = 100;
  double last_emit_sim_time = 0.0;
  bool emitted_once = false;
};

struct Snapshot {
  UavState state;
  Guidance guidance;
  std::optional<Command> pending;
  double progress = 0.0;  // fraction of the pending command's distance covered
  Nanos t_frozen = 0;
};

struct CommandOutcome {
  bool accepted = false;
  Telemetry telemetry;  // ack or nack record
};

/// Point-mass vehicle in a local frame anchored at its home position.
class Vehicle {
 public:
  Vehicle(int uav_id, const geo::GeoPos& home, VehicleParams params = {}, Nanos t_spawn = 0);

  int id() const { return state_.uav_id; }
  const UavState& state() const { return state_; }
  const Guidance& guidance() const { return guidance_; }
  const VehicleParams& params() const { return params_; }
  const geo::GeoPos& home() const { return home_; }
  bool frozen() const { return frozen_; }

  CommandOutcome handle_command(const Command& cmd, Nanos now);

  /// Advances the model by dt seconds. Returns telemetry when the change
  /// policy fires. Throws FlightError when dt is outside (0, 0.1] or the
  /// vehicle is frozen.
  std::optional<Telemetry> step(double dt, Nanos now);

  /// Unconditional telemetry record (used for the first report after spawn).
  Telemetry report(Nanos now);

  Snapshot freeze(Nanos now);
  void resume(const Snapshot& snap, Nanos pause_ns);

 private:
  void steer_horizontal(double dt);
  void steer_vertical(double dt, double target_z);
  void drain_battery(double dt);
  void sync_pos();
  bool reached_target() const;
  Telemetry make_telemetry(Nanos now);
  double progress() const;

  VehicleParams params_;
  geo::GeoPos home_;
  UavState state_;
  Guidance guidance_;
  bool frozen_ = false;
};

}  // namespace uavnet::flightsim
