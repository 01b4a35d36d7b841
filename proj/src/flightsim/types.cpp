#include "uavnet/flightsim/types.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace uavnet::flightsim {
namespace {

constexpr std::array<std::pair<Mode, std::string_view>, 6> kModes{{
    {Mode::Disarmed, "disarmed"},
    {Mode::Armed, "armed"},
    {Mode::TakingOff, "taking_off"},
    {Mode::Hovering, "hovering"},
    {Mode::Moving, "moving"},
    {Mode::Landing, "landing"},
}};

constexpr std::array<std::pair<CommandKind, std::string_view>, 6> kKinds{{
    {CommandKind::Arm, "arm"},
    {CommandKind::Takeoff, "takeoff"},
    {CommandKind::Goto, "goto"},
    {CommandKind::Move, "move"},
    {CommandKind::SetSpeed, "set_speed"},
    {CommandKind::Land, "land"},
}};

}  // namespace

std::string_view to_string(Mode m) {
  for (const auto& [k, v] : kModes)
    if (k == m) return v;
  return "unknown";
}

Mode parse_mode(std::string_view s) {
  for (const auto& [k, v] : kModes)
    if (v == s) return k;
  throw FlightError("unknown mode '" + std::string(s) + "'");
}

bool is_airborne(Mode m) {
  return m == Mode::TakingOff || m == Mode::Hovering || m == Mode::Moving || m == Mode::Landing;
}

std::string_view to_string(CommandKind k) {
  for (const auto& [kind, v] : kKinds)
    if (kind == k) return v;
  return "unknown";
}

CommandKind parse_command_kind(std::string_view s) {
  for (const auto& [kind, v] : kKinds)
    if (v == s) return kind;
  throw FlightError("unknown command kind '" + std::string(s) + "'");
}

double Velocity::horizontal() const { return std::hypot(vx, vy); }

Command Command::arm() { return Command{}; }

Command Command::takeoff(double alt_m) {
  Command c;
  c.kind = CommandKind::Takeoff;
  c.alt_m = alt_m;
  return c;
}

Command Command::go_to(const geo::GeoPos& target) {
  Command c;
  c.kind = CommandKind::Goto;
  c.target = target;
  return c;
}

Command Command::move(double dx, double dy, double dz) {
  Command c;
  c.kind = CommandKind::Move;
  c.dx = dx;
  c.dy = dy;
  c.dz = dz;
  return c;
}

Command Command::set_speed(double speed_mps) {
  Command c;
  c.kind = CommandKind::SetSpeed;
  c.speed_mps = speed_mps;
  return c;
}

Command Command::land() {
  Command c;
  c.kind = CommandKind::Land;
  return c;
}

}  // namespace uavnet::flightsim
