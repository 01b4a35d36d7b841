#include "uavnet/flightsim/codec.hpp"

#include "json.hpp"

namespace uavnet::flightsim {

using nlohmann::json;

std::string encode_telemetry(const Telemetry& t) {
  json j;
  j["uav_id"] = t.uav_id;
  j["seq"] = t.seq;
  j["lat"] = t.pos.lat;
  j["lon"] = t.pos.lon;
  j["alt"] = t.pos.alt;
  j["vx"] = t.vel.vx;
  j["vy"] = t.vel.vy;
  j["vz"] = t.vel.vz;
  j["heading"] = t.heading;
  j["battery_pct"] = t.battery_pct;
  j["mode"] = std::string(to_string(t.mode));
  j["t_gen"] = t.t_gen;
  if (t.ack_cmd_id) {
    j["ack_cmd_id"] = *t.ack_cmd_id;
    j["ack"] = t.ack_status == AckStatus::Ack ? "ack" : "nack";
  }
  return j.dump();
}

Telemetry decode_telemetry(std::string_view text) {
  try {
    const json j = json::parse(text);
    Telemetry t;
    t.uav_id = j.at("uav_id").get<int>();
    t.seq = j.at("seq").get<std::uint64_t>();
    t.pos = geo::GeoPos::make(j.at("lat").get<double>(), j.at("lon").get<double>(),
                              j.at("alt").get<double>());
    t.vel = Velocity{j.at("vx").get<double>(), j.at("vy").get<double>(), j.at("vz").get<double>()};
    t.heading = j.at("heading").get<double>();
    t.battery_pct = j.at("battery_pct").get<double>();
    t.mode = parse_mode(j.at("mode").get<std::string>());
    t.t_gen = j.at("t_gen").get<Nanos>();
    if (j.contains("ack_cmd_id")) {
      t.ack_cmd_id = j.at("ack_cmd_id").get<std::uint64_t>();
      const auto s = j.at("ack").get<std::string>();
      if (s != "ack" && s != "nack") throw FlightError("bad ack status '" + s + "'");
      t.ack_status = s == "ack" ? AckStatus::Ack : AckStatus::Nack;
    }
    return t;
  } catch (const json::exception& e) {
    throw FlightError(std::string("malformed telemetry: ") + e.what());
  } catch (const geo::GeoError& e) {
    throw FlightError(std::string("malformed telemetry: ") + e.what());
  }
}

std::string encode_command(const Command& c) {
  json j;
  j["type"] = "command";
  j["cmd_id"] = c.cmd_id;
  j["t_issue"] = c.t_issue;
  j["kind"] = std::string(to_string(c.kind));
  switch (c.kind) {
    case CommandKind::Takeoff:
      j["alt_m"] = c.alt_m;
      break;
    case CommandKind::Goto:
      j["lat"] = c.target.lat;
      j["lon"] = c.target.lon;
      j["alt_m"] = c.target.alt;
      break;
    case CommandKind::Move:
      j["dx"] = c.dx;
      j["dy"] = c.dy;
      j["dz"] = c.dz;
      break;
    case CommandKind::SetSpeed:
      j["speed_mps"] = c.speed_mps;
      break;
    case CommandKind::Arm:
    case CommandKind::Land:
      break;
  }
  return j.dump();
}

std::string encode_heartbeat(const Heartbeat& h, std::size_t pad_to) {
  json j;
  j["type"] = "heartbeat";
  j["seq"] = h.seq;
  j["t_gen"] = h.t_gen;
  std::string out = j.dump();
  constexpr std::size_t kPadOverhead = 9;  // ,"pad":""
  if (out.size() + kPadOverhead <= pad_to) {
    j["pad"] = std::string(pad_to - out.size() - kPadOverhead, '.');
    out = j.dump();
  }
  return out;
}

Uplink decode_uplink(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto type = j.at("type").get<std::string>();
    if (type == "heartbeat") {
      return Heartbeat{j.at("seq").get<std::uint64_t>(), j.at("t_gen").get<Nanos>()};
    }
    if (type != "command") throw FlightError("unknown uplink type '" + type + "'");
    Command c;
    c.kind = parse_command_kind(j.at("kind").get<std::string>());
    c.cmd_id = j.at("cmd_id").get<std::uint64_t>();
    c.t_issue = j.value("t_issue", Nanos{0});
    switch (c.kind) {
      case CommandKind::Takeoff:
        c.alt_m = j.at("alt_m").get<double>();
        break;
      case CommandKind::Goto:
        c.target = geo::GeoPos::make(j.at("lat").get<double>(), j.at("lon").get<double>(),
                                     j.at("alt_m").get<double>());
        break;
      case CommandKind::Move:
        c.dx = j.value("dx", 0.0);
        c.dy = j.value("dy", 0.0);
        c.dz = j.value("dz", 0.0);
        break;
      case CommandKind::SetSpeed:
        c.speed_mps = j.at("speed_mps").get<double>();
        break;
      case CommandKind::Arm:
      case CommandKind::Land:
        break;
    }
    return c;
  } catch (const json::exception& e) {
    throw FlightError(std::string("malformed uplink: ") + e.what());
  } catch (const geo::GeoError& e) {
    throw FlightError(std::string("malformed uplink: ") + e.what());
  }
}

}  // namespace uavnet::flightsim

namespace uavnet::flightsim {

std::string encode_freeze(const FreezeSignal& s) {
  nlohmann::json j;
  j["state"] = s.frozen ? "frozen" : "resumed";
  j["t_ns"] = s.t_ns;
  j["pause_ns"] = s.pause_ns;
  return j.dump();
}

FreezeSignal decode_freeze(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto state = j.at("state").get<std::string>();
    if (state != "frozen" && state != "resumed")
      throw FlightError("unknown freeze state '" + state + "'");
    return FreezeSignal{state == "frozen", j.at("t_ns").get<Nanos>(), j.value("pause_ns", Nanos{0})};
  } catch (const nlohmann::json::exception& e) {
    throw FlightError(std::string("malformed freeze signal: ") + e.what());
  }
}

}  // namespace uavnet::flightsim
