#include "uavnet/flightsim/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace uavnet::flightsim {
namespace {

constexpr double kSnapM = 1e-6;

double clamp_abs(double v, double lim) { return std::clamp(v, -lim, lim); }

}  // namespace

Vehicle::Vehicle(int uav_id, const geo::GeoPos& home, VehicleParams params, Nanos t_spawn)
    : params_(params), home_(home) {
  if (!home.valid()) throw FlightError("invalid home position " + geo::to_string(home));
  state_.uav_id = uav_id;
  state_.pos = home;
  state_.battery_pct = params.initial_battery_pct;
  state_.t_state = t_spawn;
  guidance_.speed_limit = params.v_h_max;
  guidance_.last_emit_battery_floor = static_cast<int>(std::floor(state_.battery_pct));
}

CommandOutcome Vehicle::handle_command(const Command& cmd, Nanos now) {
  const Mode m = state_.mode;
  bool ok = false;
  switch (cmd.kind) {
    case CommandKind::Arm:
      ok = m == Mode::Disarmed && state_.battery_pct > 0.0;
      if (ok) state_.mode = Mode::Armed;
      break;
    case CommandKind::Takeoff:
      ok = m == Mode::Armed && cmd.alt_m > 0.0 && std::isfinite(cmd.alt_m) &&
           state_.battery_pct > 0.0;
      if (ok) {
        state_.mode = Mode::TakingOff;
        guidance_.target = {state_.local.x, state_.local.y, cmd.alt_m};
      }
      break;
    case CommandKind::Goto:
    case CommandKind::Move: {
      if (m != Mode::Hovering && m != Mode::Moving) break;
      geo::LocalXY target;
      if (cmd.kind == CommandKind::Goto) {
        if (!cmd.target.valid()) break;
        try {
          target = geo::to_local(home_, cmd.target);
        } catch (const geo::GeoError&) {
          break;
        }
        target.z = cmd.target.alt - home_.alt;
      } else {
        if (!std::isfinite(cmd.dx) || !std::isfinite(cmd.dy) || !std::isfinite(cmd.dz)) break;
        target = state_.local + geo::LocalXY{cmd.dx, cmd.dy, cmd.dz};
      }
      if (target.z < 0.0) break;
      ok = true;
      state_.mode = Mode::Moving;
      guidance_.target = target;
      break;
    }
    case CommandKind::SetSpeed:
      ok = cmd.speed_mps > 0.0 && cmd.speed_mps <= params_.v_h_max;
      if (ok) guidance_.speed_limit = cmd.speed_mps;
      break;
    case CommandKind::Land:
      ok = m == Mode::TakingOff || m == Mode::Hovering || m == Mode::Moving;
      if (ok) {
        state_.mode = Mode::Landing;
        guidance_.target = {state_.local.x, state_.local.y, 0.0};
      }
      break;
  }
  if (ok && cmd.kind != CommandKind::SetSpeed && cmd.kind != CommandKind::Arm) {
    guidance_.has_target = true;
    guidance_.cmd_start = state_.local;
    guidance_.active = cmd;
  }
  CommandOutcome out;
  out.accepted = ok;
  out.telemetry = make_telemetry(now);
  out.telemetry.ack_cmd_id = cmd.cmd_id;
  out.telemetry.ack_status = ok ? AckStatus::Ack : AckStatus::Nack;
  return out;
}

void Vehicle::steer_horizontal(double dt) {
  auto& v = state_.vel;
  const double ex = guidance_.target.x - state_.local.x;
  const double ey = guidance_.target.y - state_.local.y;
  const double dist = std::hypot(ex, ey);
  double dvx = -v.vx;
  double dvy = -v.vy;
  if (dist > 0.0) {
    // Largest speed from which the vehicle can still brake to rest at the
    // target after this tick's position update.
    const double a = params_.a_max;
    const double v_along = (v.vx * ex + v.vy * ey) / dist;
    const double room = std::max(0.0, dist - 0.5 * v_along * dt);
    const double h = 0.5 * a * dt;
    const double v_brake = std::sqrt(h * h + 2.0 * a * room) - h;
    const double mag = std::min(guidance_.speed_limit, v_brake);
    dvx += ex / dist * mag;
    dvy += ey / dist * mag;
  }
  const double dv = std::hypot(dvx, dvy);
  const double dv_max = params_.a_max * dt;
  if (dv > dv_max) {
    dvx *= dv_max / dv;
    dvy *= dv_max / dv;
  }
  const double vx0 = v.vx;
  const double vy0 = v.vy;
  v.vx += dvx;
  v.vy += dvy;
  const double h = v.horizontal();
  if (h > params_.v_h_max) {
    v.vx *= params_.v_h_max / h;
    v.vy *= params_.v_h_max / h;
  }
  // Trapezoidal position update: exact under piecewise-constant acceleration.
  state_.local.x += 0.5 * (vx0 + v.vx) * dt;
  state_.local.y += 0.5 * (vy0 + v.vy) * dt;
  if (h > 0.1) state_.heading = std::atan2(v.vx, v.vy);
}

void Vehicle::steer_vertical(double dt, double target_z) {
  const double ez = target_z - state_.local.z;
  if (std::abs(ez) < kSnapM) {
    state_.local.z = target_z;
    state_.vel.vz = 0.0;
    return;
  }
  state_.vel.vz = clamp_abs(ez / dt, params_.v_z_max);
  state_.local.z += state_.vel.vz * dt;
  if (std::abs(target_z - state_.local.z) < kSnapM) state_.local.z = target_z;
}

void Vehicle::drain_battery(double dt) {
  double rate = 0.0;
  if (is_airborne(state_.mode))
    rate = params_.r_fly;
  else if (state_.mode == Mode::Armed)
    rate = params_.r_idle;
  state_.battery_pct = std::max(0.0, state_.battery_pct - rate * dt);
  if (state_.battery_pct <= 0.0 &&
      (state_.mode == Mode::TakingOff || state_.mode == Mode::Hovering ||
       state_.mode == Mode::Moving)) {
    state_.mode = Mode::Landing;
    guidance_.target = {state_.local.x, state_.local.y, 0.0};
    guidance_.has_target = true;
    guidance_.active.reset();
  }
}

void Vehicle::sync_pos() { state_.pos = geo::from_local(home_, state_.local); }

bool Vehicle::reached_target() const {
  return geo::distance(state_.local, guidance_.target) < params_.arrival_radius_m;
}

std::optional<Telemetry> Vehicle::step(double dt, Nanos now) {
  if (!(dt > 0.0 && dt <= 0.1)) throw FlightError("step dt must be in (0, 0.1] s");
  if (frozen_) throw FlightError("step on frozen vehicle " + std::to_string(id()));

  const bool airborne_before = is_airborne(state_.mode);
  switch (state_.mode) {
    case Mode::Disarmed:
    case Mode::Armed:
      break;
    case Mode::TakingOff:
      steer_horizontal(dt);
      steer_vertical(dt, guidance_.target.z);
      if (state_.local.z == guidance_.target.z) {
        state_.mode = Mode::Hovering;
        guidance_.active.reset();
      }
      break;
    case Mode::Hovering:
    case Mode::Moving:
      steer_horizontal(dt);
      steer_vertical(dt, guidance_.target.z);
      if (state_.mode == Mode::Moving && reached_target()) {
        state_.mode = Mode::Hovering;
        guidance_.active.reset();
      }
      break;
    case Mode::Landing:
      steer_horizontal(dt);
      steer_vertical(dt, 0.0);
      if (state_.local.z <= 0.0) {
        state_.local.z = 0.0;
        state_.vel = {};
        state_.mode = Mode::Disarmed;
        guidance_.has_target = false;
        guidance_.active.reset();
      }
      break;
  }
  if (airborne_before) state_.flight_time_s += dt;
  drain_battery(dt);
  state_.sim_time_s += dt;
  state_.t_state = now;
  sync_pos();

  const bool moved =
      geo::distance(state_.local, guidance_.last_emit_pos) >= params_.telemetry_move_m;
  const bool discrete = state_.mode != guidance_.last_emit_mode ||
                        static_cast<int>(std::floor(state_.battery_pct)) !=
                            guidance_.last_emit_battery_floor;
  const bool heartbeat = !guidance_.emitted_once ||
                         state_.sim_time_s - guidance_.last_emit_sim_time >=
                             params_.heartbeat_s - 1e-9;
  if (moved || discrete || heartbeat) return make_telemetry(now);
  return std::nullopt;
}

Telemetry Vehicle::report(Nanos now) { return make_telemetry(now); }

Telemetry Vehicle::make_telemetry(Nanos now) {
  Telemetry t;
  t.uav_id = state_.uav_id;
  t.seq = guidance_.next_seq++;
  t.pos = state_.pos;
  t.vel = state_.vel;
  t.heading = state_.heading;
  t.battery_pct = state_.battery_pct;
  t.mode = state_.mode;
  t.t_gen = now;
  guidance_.last_emit_pos = state_.local;
  guidance_.last_emit_mode = state_.mode;
  guidance_.last_emit_battery_floor = static_cast<int>(std::floor(state_.battery_pct));
  guidance_.last_emit_sim_time = state_.sim_time_s;
  guidance_.emitted_once = true;
  return t;
}

double Vehicle::progress() const {
  if (!guidance_.active) return 1.0;
  const double total = geo::distance(guidance_.cmd_start, guidance_.target);
  if (total <= 0.0) return 1.0;
  return std::clamp(1.0 - geo::distance(state_.local, guidance_.target) / total, 0.0, 1.0);
}

Snapshot Vehicle::freeze(Nanos now) {
  if (frozen_) throw FlightError("vehicle " + std::to_string(id()) + " already frozen");
  frozen_ = true;
  Snapshot s;
  s.state = state_;
  s.guidance = guidance_;
  s.pending = guidance_.active;
  s.progress = progress();
  s.t_frozen = now;
  return s;
}

void Vehicle::resume(const Snapshot& snap, Nanos pause_ns) {
  if (!frozen_) throw FlightError("vehicle " + std::to_string(id()) + " is not frozen");
  if (snap.state.uav_id != id()) throw FlightError("snapshot belongs to another vehicle");
  if (pause_ns < 0) throw FlightError("negative pause duration");
  state_ = snap.state;
  guidance_ = snap.guidance;
  state_.t_state = snap.state.t_state + pause_ns;
  frozen_ = false;
}

}  // namespace uavnet::flightsim
