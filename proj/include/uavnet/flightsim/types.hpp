#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "uavnet/core/clock.hpp"
#include "uavnet/geo/geo.hpp"

namespace uavnet::flightsim {

class FlightError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { Disarmed, Armed, TakingOff, Hovering, Moving, Landing };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);
bool is_airborne(Mode m);

struct Velocity {
  double vx = 0.0;  // east
  double vy = 0.0;  // north
  double vz = 0.0;  // up
  double horizontal() const;
  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Performance limits and bookkeeping constants of the point-mass model.
struct VehicleParams {
  double v_h_max = 5.0;     // m/s
  double v_z_max = 2.5;     // m/s
  double a_max = 2.0;       // m/s^2
  double tick_s = 0.01;
  double heartbeat_s = 1.0;
  double arrival_radius_m = 0.5;
  double r_fly = 100.0 / 900.0;    // %/s airborne (15 min endurance)
  double r_idle = 100.0 / 7200.0;  // %/s armed on the ground
  double telemetry_move_m = 0.1;
  double initial_battery_pct = 100.0;
};

struct UavState {
  int uav_id = 0;
  geo::GeoPos pos;
  geo::LocalXY local;  // relative to home
  Velocity vel;
  double heading = 0.0;  // radians, clockwise from north
  Mode mode = Mode::Disarmed;
  double battery_pct = 100.0;
  Nanos t_state = 0;
  double flight_time_s = 0.0;  // airborne seconds
  double sim_time_s = 0.0;     // integrated seconds since spawn
};

enum class CommandKind { Arm, Takeoff, Goto, Move, SetSpeed, Land };

std::string_view to_string(CommandKind k);
CommandKind parse_command_kind(std::string_view s);

struct Command {
  CommandKind kind = CommandKind::Arm;
  double alt_m = 0.0;        // Takeoff
  geo::GeoPos target;        // Goto
  double dx = 0.0;           // Move
  double dy = 0.0;
  double dz = 0.0;
  double speed_mps = 0.0;    // SetSpeed
  std::uint64_t cmd_id = 0;
  Nanos t_issue = 0;

  static Command arm();
  static Command takeoff(double alt_m);
  static Command go_to(const geo::GeoPos& target);
  static Command move(double dx, double dy, double dz);
  static Command set_speed(double speed_mps);
  static Command land();
};

enum class AckStatus { Ack, Nack };

struct Telemetry {
  int uav_id = 0;
  std::uint64_t seq = 0;
  geo::GeoPos pos;
  Velocity vel;
  double heading = 0.0;
  double battery_pct = 0.0;
  Mode mode = Mode::Disarmed;
  Nanos t_gen = 0;
  std::optional<std::uint64_t> ack_cmd_id;
  AckStatus ack_status = AckStatus::Ack;
};

}  // namespace uavnet::flightsim
