#include "uavnet/scenario/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "uavnet/flightsim/topics.hpp"

namespace uavnet::scenario {

using nlohmann::json;
using netsim::IfaceKind;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ScenarioError(path + ": " + what);
}

/// Field reader over one JSON object; rejects keys outside `allowed`.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) fail(at(k), "unknown field");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }

  double num(const char* key, double def) const { return has(key) ? req_num(key) : def; }
  double req_num(const char* key) const {
    if (!has(key)) fail(at(key), "required");
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(at(key), "must be finite");
    return d;
  }
  std::int64_t integer(const char* key, std::int64_t def) const { return has(key) ? req_int(key) : def; }
  std::int64_t req_int(const char* key) const {
    if (!has(key)) fail(at(key), "required");
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(at(key), "must be an integer");
    return v.get<std::int64_t>();
  }
  std::string str(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "must be a string");
    return v.get<std::string>();
  }
  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "must be a boolean");
    return v.get<bool>();
  }
  const json& array(const char* key) const {
    static const json kEmpty = json::array();
    if (!has(key)) return kEmpty;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(at(key), "must be an array");
    return v;
  }

 private:
  const json& j_;
  std::string path_;
};

std::string idx(const std::string& path, std::size_t i) { return fmt::format("{}[{}]", path, i); }

geo::LocalXY parse_xyz(const json& j, const std::string& path, geo::LocalXY def) {
  Obj o(j, path, {"x", "y", "z"});
  return {o.num("x", def.x), o.num("y", def.y), o.num("z", def.z)};
}

json xyz_json(const geo::LocalXY& p) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}}; }

geo::GeoPos make_geo(const std::string& path, double lat, double lon, double alt) {
  try {
    return geo::GeoPos::make(lat, lon, alt);
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

/// Either {lat, lon, alt_m} or a local offset {x, y, z} from the origin.
geo::GeoPos parse_place(const json& j, const std::string& path, const geo::GeoPos& origin) {
  Obj o(j, path, {"lat", "lon", "alt_m", "x", "y", "z"});
  const bool geo_form = o.has("lat") || o.has("lon");
  const bool local_form = o.has("x") || o.has("y") || o.has("z");
  if (geo_form && local_form) fail(path, "use either lat/lon/alt_m or x/y/z, not both");
  if (local_form) {
    if (o.has("alt_m")) fail(o.at("alt_m"), "use z with x/y");
    return geo::from_local(origin, {o.num("x", 0.0), o.num("y", 0.0), o.num("z", 0.0)});
  }
  return make_geo(path, o.req_num("lat"), o.req_num("lon"), o.num("alt_m", 0.0));
}

json geo_json(const geo::GeoPos& p) { return {{"lat", p.lat}, {"lon", p.lon}, {"alt_m", p.alt}}; }

netsim::ChannelParams parse_channel(const json& j, const std::string& path) {
  Obj o(j, path, {"pl0_db", "d0_m", "exponent", "nakagami_m", "noise_floor_dbm"});
  netsim::ChannelParams c;
  c.pl0_db = o.num("pl0_db", c.pl0_db);
  c.d0_m = o.num("d0_m", c.d0_m);
  c.exponent = o.num("exponent", c.exponent);
  c.nakagami_m = o.num("nakagami_m", c.nakagami_m);
  c.noise_floor_dbm = o.num("noise_floor_dbm", c.noise_floor_dbm);
  try {
    c.validate();
  } catch (const netsim::NetError& e) {
    fail(path, e.what());
  }
  return c;
}

json channel_json(const netsim::ChannelParams& c) {
  return {{"pl0_db", c.pl0_db},
          {"d0_m", c.d0_m},
          {"exponent", c.exponent},
          {"nakagami_m", c.nakagami_m},
          {"noise_floor_dbm", c.noise_floor_dbm}};
}

gcs::MissionStep parse_step(const json& j, const std::string& path, const geo::GeoPos& origin) {
  using flightsim::Command;
  Obj o(j, path, {"kind", "alt_m", "lat", "lon", "x", "y", "dx", "dy", "dz", "speed_mps", "hold_s"});
  const auto kind = o.str("kind", "");
  gcs::MissionStep s;
  s.hold_s = o.num("hold_s", 0.0);
  if (s.hold_s < 0.0) fail(o.at("hold_s"), "must be >= 0");
  if (kind == "arm") {
    s.cmd = Command::arm();
  } else if (kind == "land") {
    s.cmd = Command::land();
  } else if (kind == "takeoff") {
    const double alt = o.req_num("alt_m");
    if (!(alt > 0.0)) fail(o.at("alt_m"), "must be > 0");
    s.cmd = Command::takeoff(alt);
  } else if (kind == "goto") {
    const double alt = o.req_num("alt_m");
    if (o.has("x") || o.has("y")) {
      if (o.has("lat") || o.has("lon")) fail(path, "use either lat/lon or x/y, not both");
      auto p = geo::from_local(origin, {o.num("x", 0.0), o.num("y", 0.0), 0.0});
      s.cmd = Command::go_to(make_geo(path, p.lat, p.lon, alt));
    } else {
      s.cmd = Command::go_to(make_geo(path, o.req_num("lat"), o.req_num("lon"), alt));
    }
  } else if (kind == "move") {
    s.cmd = Command::move(o.num("dx", 0.0), o.num("dy", 0.0), o.num("dz", 0.0));
  } else if (kind == "set_speed") {
    const double v = o.req_num("speed_mps");
    if (!(v > 0.0)) fail(o.at("speed_mps"), "must be > 0");
    s.cmd = Command::set_speed(v);
  } else {
    fail(o.at("kind"), "must be one of arm|takeoff|goto|move|set_speed|land");
  }
  return s;
}

json step_json(const gcs::MissionStep& s) {
  using flightsim::CommandKind;
  json j{{"kind", std::string(flightsim::to_string(s.cmd.kind))}};
  switch (s.cmd.kind) {
    case CommandKind::Takeoff:
      j["alt_m"] = s.cmd.alt_m;
      break;
    case CommandKind::Goto:
      j["lat"] = s.cmd.target.lat;
      j["lon"] = s.cmd.target.lon;
      j["alt_m"] = s.cmd.target.alt;
      break;
    case CommandKind::Move:
      j["dx"] = s.cmd.dx;
      j["dy"] = s.cmd.dy;
      j["dz"] = s.cmd.dz;
      break;
    case CommandKind::SetSpeed:
      j["speed_mps"] = s.cmd.speed_mps;
      break;
    default:
      break;
  }
  if (s.hold_s > 0.0) j["hold_s"] = s.hold_s;
  return j;
}

int parse_endpoint(const json& v, const std::string& path) {
  if (v.is_string() && v.get<std::string>() == "gcs") return kGcsEndpoint;
  if (v.is_number_integer()) return v.get<int>();
  fail(path, "must be \"gcs\" or a UAV id");
}

json endpoint_json(int e) { return e == kGcsEndpoint ? json("gcs") : json(e); }

StreamKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "control") return StreamKind::Control;
  if (s == "telemetry") return StreamKind::Telemetry;
  if (s == "frames") return StreamKind::Frames;
  fail(path, "must be one of control|telemetry|frames");
}

IfaceKind parse_iface_at(const std::string& s, const std::string& path) {
  try {
    return netsim::parse_iface(s);
  } catch (const std::exception&) {
    fail(path, "must be one of wifi|lte|d2d");
  }
}

}  // namespace

const char* to_string(StreamKind k) {
  switch (k) {
    case StreamKind::Control: return "control";
    case StreamKind::Telemetry: return "telemetry";
    case StreamKind::Frames: return "frames";
  }
  return "?";
}

bool UavConfig::has(IfaceKind k) const {
  return std::find(interfaces.begin(), interfaces.end(), k) != interfaces.end();
}

std::string StreamConfig::topic() const {
  switch (kind) {
    case StreamKind::Control: return flightsim::command_topic(dst);
    case StreamKind::Telemetry: return flightsim::telemetry_topic(src);
    case StreamKind::Frames: return flightsim::frame_topic(src, name);
  }
  return {};
}

const UavConfig* ScenarioConfig::uav(int id) const {
  for (const auto& u : uavs)
    if (u.id == id) return &u;
  return nullptr;
}

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("document: malformed JSON: ") + e.what());
  }
  Obj root(doc, "", {"name", "sim", "origin", "uavs", "wifi", "d2d", "lte", "interferers", "streams",
                     "faults", "metrics"});
  ScenarioConfig c;
  c.name = root.str("name", c.name);

  if (!root.has("sim")) fail("sim", "required");
  {
    Obj o(root.raw("sim"), "sim", {"duration_s", "sync_mode", "seed", "tick_ms", "drain_s", "logical_time"});
    c.sim.duration_s = o.req_num("duration_s");
    if (!o.has("seed")) fail("sim.seed", "required");
    const auto seed = o.req_int("seed");
    if (seed < 0) fail("sim.seed", "must be >= 0");
    c.sim.seed = static_cast<std::uint64_t>(seed);
    const auto mode = o.str("sync_mode", "besteffort");
    try {
      c.sim.sync_mode = netsim::parse_sync_mode(mode);
    } catch (const std::exception&) {
      fail("sim.sync_mode", "must be one of besteffort|hardlimit|freeze_assist");
    }
    c.sim.tick_ms = o.num("tick_ms", c.sim.tick_ms);
    c.sim.drain_s = o.num("drain_s", c.sim.drain_s);
    c.sim.logical_time = o.boolean("logical_time", false);
  }

  if (root.has("origin")) {
    Obj o(root.raw("origin"), "origin", {"lat", "lon", "alt_m"});
    c.origin = make_geo("origin", o.req_num("lat"), o.req_num("lon"), o.num("alt_m", 0.0));
  }

  const auto& uavs = root.array("uavs");
  for (std::size_t i = 0; i < uavs.size(); ++i) {
    const auto path = idx("uavs", i);
    Obj o(uavs[i], path, {"id", "home", "interfaces", "mission"});
    UavConfig u;
    const auto id = o.req_int("id");
    if (id < 0 || id >= netsim::kGcsNodeId) fail(o.at("id"), fmt::format("must be in [0, {}]", netsim::kGcsNodeId - 1));
    u.id = static_cast<int>(id);
    u.home = o.has("home") ? parse_place(o.raw("home"), o.at("home"), c.origin) : c.origin;
    const auto& ifs = o.array("interfaces");
    for (std::size_t k = 0; k < ifs.size(); ++k) {
      const auto p = idx(o.at("interfaces"), k);
      if (!ifs[k].is_string()) fail(p, "must be a string");
      const auto kind = parse_iface_at(ifs[k].get<std::string>(), p);
      if (u.has(kind)) fail(p, "duplicate interface");
      u.interfaces.push_back(kind);
    }
    const auto& mission = o.array("mission");
    for (std::size_t k = 0; k < mission.size(); ++k)
      u.mission.push_back(parse_step(mission[k], idx(o.at("mission"), k), c.origin));
    c.uavs.push_back(std::move(u));
  }

  if (root.has("wifi")) {
    Obj o(root.raw("wifi"), "wifi", {"ap_pos", "tx_dbm", "channel"});
    if (o.has("ap_pos")) c.wifi.ap_pos = parse_xyz(o.raw("ap_pos"), "wifi.ap_pos", c.wifi.ap_pos);
    c.wifi.tx_dbm = o.num("tx_dbm", c.wifi.tx_dbm);
    if (o.has("channel")) c.wifi.channel = parse_channel(o.raw("channel"), "wifi.channel");
  }
  if (root.has("d2d")) {
    Obj o(root.raw("d2d"), "d2d", {"tx_dbm", "channel"});
    c.d2d.tx_dbm = o.num("tx_dbm", c.d2d.tx_dbm);
    if (o.has("channel")) c.d2d.channel = parse_channel(o.raw("channel"), "d2d.channel");
  }
  if (root.has("lte")) {
    Obj o(root.raw("lte"), "lte", {"enb_pos", "params", "channel"});
    if (o.has("enb_pos")) c.lte.enb_pos = parse_xyz(o.raw("enb_pos"), "lte.enb_pos", c.lte.enb_pos);
    if (o.has("channel")) c.lte.channel = parse_channel(o.raw("channel"), "lte.channel");
    if (o.has("params")) {
      Obj p(o.raw("params"), "lte.params",
            {"ul_bw_hz", "dl_bw_hz", "max_grant_period_ms", "max_ues", "core_delay_ms", "ue_tx_dbm",
             "enb_tx_dbm", "sensitivity_dbm"});
      auto& lp = c.lte.params;
      lp.ul_bw_hz = p.num("ul_bw_hz", lp.ul_bw_hz);
      lp.dl_bw_hz = p.num("dl_bw_hz", lp.dl_bw_hz);
      lp.max_grant_period_ms = static_cast<int>(p.integer("max_grant_period_ms", lp.max_grant_period_ms));
      lp.max_ues = static_cast<int>(p.integer("max_ues", lp.max_ues));
      lp.core_delay_ns = ms_to_ns(p.num("core_delay_ms", ns_to_ms(lp.core_delay_ns)));
      lp.ue_tx_dbm = p.num("ue_tx_dbm", lp.ue_tx_dbm);
      lp.enb_tx_dbm = p.num("enb_tx_dbm", lp.enb_tx_dbm);
      lp.sensitivity_dbm = p.num("sensitivity_dbm", lp.sensitivity_dbm);
    }
  }

  const auto& ints = root.array("interferers");
  for (std::size_t i = 0; i < ints.size(); ++i) {
    const auto path = idx("interferers", i);
    Obj o(ints[i], path, {"count", "rate_mbps", "pkt_bytes", "pos", "velocity", "start_s", "stop_s", "saturated"});
    netsim::InterfererConfig f;
    f.count = static_cast<int>(o.req_int("count"));
    f.rate_mbps = o.num("rate_mbps", f.rate_mbps);
    const auto bytes = o.integer("pkt_bytes", static_cast<std::int64_t>(f.pkt_bytes));
    if (bytes <= 0) fail(o.at("pkt_bytes"), "must be > 0");
    f.pkt_bytes = static_cast<std::size_t>(bytes);
    if (o.has("pos")) f.pos = parse_xyz(o.raw("pos"), o.at("pos"), {});
    if (o.has("velocity")) f.velocity = parse_xyz(o.raw("velocity"), o.at("velocity"), {});
    f.start_s = o.num("start_s", 0.0);
    f.stop_s = o.num("stop_s", std::numeric_limits<double>::infinity());
    f.saturated = o.boolean("saturated", false);
    c.interferers.push_back(f);
  }

  const auto& streams = root.array("streams");
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto path = idx("streams", i);
    Obj o(streams[i], path,
          {"name", "src", "dst", "kind", "iface", "rate_hz", "payload_bytes", "gop", "i_frame_bytes",
           "p_frame_bytes"});
    StreamConfig s;
    s.name = o.str("name", "");
    if (!o.has("src")) fail(o.at("src"), "required");
    if (!o.has("dst")) fail(o.at("dst"), "required");
    s.src = parse_endpoint(o.raw("src"), o.at("src"));
    s.dst = parse_endpoint(o.raw("dst"), o.at("dst"));
    if (!o.has("kind")) fail(o.at("kind"), "required");
    s.kind = parse_kind(o.str("kind", ""), o.at("kind"));
    s.iface = parse_iface_at(o.str("iface", "wifi"), o.at("iface"));
    const bool frames = s.kind == StreamKind::Frames;
    s.rate_hz = o.num("rate_hz", frames ? 30.0 : 10.0);
    const auto payload = o.integer("payload_bytes", frames ? 1000 : 100);
    if (payload <= 0) fail(o.at("payload_bytes"), "must be > 0");
    s.payload_bytes = static_cast<std::size_t>(payload);
    s.gop = static_cast<int>(o.integer("gop", 12));
    s.i_frame_bytes = static_cast<std::size_t>(std::max<std::int64_t>(0, o.integer("i_frame_bytes", 12000)));
    s.p_frame_bytes = static_cast<std::size_t>(std::max<std::int64_t>(0, o.integer("p_frame_bytes", 3000)));
    if (s.name.empty()) s.name = fmt::format("{}-{}", to_string(s.kind), s.uav());
    c.streams.push_back(std::move(s));
  }

  const auto& faults = root.array("faults");
  for (std::size_t i = 0; i < faults.size(); ++i) {
    const auto path = idx("faults", i);
    Obj o(faults[i], path, {"kind", "at_s", "duration_ms"});
    if (o.str("kind", "netsim_stall") != "netsim_stall") fail(o.at("kind"), "must be netsim_stall");
    c.faults.push_back({o.req_num("at_s"), o.req_num("duration_ms")});
  }

  if (root.has("metrics")) {
    Obj o(root.raw("metrics"), "metrics", {"out_dir"});
    c.out_dir = o.str("out_dir", c.out_dir);
  }

  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void validate(const ScenarioConfig& c) {
  if (!(c.sim.duration_s > 0.0)) fail("sim.duration_s", "must be > 0");
  if (!(c.sim.tick_ms > 0.0 && c.sim.tick_ms <= 100.0)) fail("sim.tick_ms", "must be in (0, 100]");
  if (!(c.sim.drain_s >= 0.0 && c.sim.drain_s < c.sim.duration_s))
    fail("sim.drain_s", "must be in [0, duration_s)");

  std::set<int> ids;
  int lte_count = 0;
  for (std::size_t i = 0; i < c.uavs.size(); ++i) {
    const auto& u = c.uavs[i];
    const auto path = idx("uavs", i);
    if (!ids.insert(u.id).second) fail(path + ".id", fmt::format("duplicate id {}", u.id));
    if (u.interfaces.empty()) fail(path + ".interfaces", "must not be empty");
    if (u.has(IfaceKind::Lte)) ++lte_count;
    auto check_local = [&](const geo::GeoPos& p, const std::string& field) {
      try {
        geo::to_local(c.origin, p);
      } catch (const geo::GeoError& e) {
        fail(field, e.what());
      }
    };
    check_local(u.home, path + ".home");
    for (std::size_t k = 0; k < u.mission.size(); ++k)
      if (u.mission[k].cmd.kind == flightsim::CommandKind::Goto)
        check_local(u.mission[k].cmd.target, idx(path + ".mission", k));
  }
  if (lte_count > c.lte.params.max_ues)
    fail("uavs", fmt::format("{} LTE UAVs exceeds LTE periodicity cap {}", lte_count, c.lte.params.max_ues));

  try {
    netsim::NetConfig nc;
    nc.lte = c.lte.params;
    nc.wifi_channel = c.wifi.channel;
    nc.d2d_channel = c.d2d.channel;
    nc.lte_channel = c.lte.channel;
    nc.validate();
  } catch (const netsim::NetError& e) {
    fail("network", e.what());
  }

  for (std::size_t i = 0; i < c.interferers.size(); ++i) {
    const auto& f = c.interferers[i];
    const auto path = idx("interferers", i);
    if (f.count < 0) fail(path + ".count", "must be >= 0");
    if (!(f.rate_mbps > 0.0)) fail(path + ".rate_mbps", "must be > 0");
    if (f.pkt_bytes == 0) fail(path + ".pkt_bytes", "must be > 0");
    if (!(f.start_s >= 0.0) || !(f.stop_s > f.start_s)) fail(path + ".stop_s", "must be > start_s >= 0");
  }

  std::set<std::string> topics;
  std::set<std::string> names;
  std::set<int> with_control;
  std::set<int> with_telemetry;
  for (std::size_t i = 0; i < c.streams.size(); ++i) {
    const auto& s = c.streams[i];
    const auto path = idx("streams", i);
    if (!names.insert(s.name).second) fail(path + ".name", "duplicate stream name " + s.name);
    if (s.kind == StreamKind::Control) {
      if (s.src != kGcsEndpoint) fail(path + ".src", "control streams originate at gcs");
      if (s.dst == kGcsEndpoint) fail(path + ".dst", "control streams end at a UAV");
    } else {
      if (s.dst != kGcsEndpoint) fail(path + ".dst", std::string(to_string(s.kind)) + " streams end at gcs");
      if (s.src == kGcsEndpoint) fail(path + ".src", std::string(to_string(s.kind)) + " streams originate at a UAV");
    }
    const auto* u = c.uav(s.uav());
    if (!u) fail(path + (s.kind == StreamKind::Control ? ".dst" : ".src"), fmt::format("unknown UAV {}", s.uav()));
    if (!u->has(s.iface))
      fail(path + ".iface", fmt::format("UAV {} has no {} interface", s.uav(), netsim::to_string(s.iface)));
    if (!(s.rate_hz > 0.0)) fail(path + ".rate_hz", "must be > 0");
    if (s.kind == StreamKind::Frames) {
      if (s.gop < 1) fail(path + ".gop", "must be >= 1");
      if (s.payload_bytes < gcs::FragmentHeader::kSize)
        fail(path + ".payload_bytes", fmt::format("must be >= {} for frame fragments", gcs::FragmentHeader::kSize));
      if (s.i_frame_bytes == 0 || s.p_frame_bytes == 0) fail(path + ".i_frame_bytes", "frame sizes must be > 0");
      if (s.name.find('/') != std::string::npos) fail(path + ".name", "must not contain '/'");
    }
    if (!topics.insert(s.topic()).second) fail(path, "another stream already carries topic " + s.topic());
    if (s.kind == StreamKind::Control) with_control.insert(s.dst);
    if (s.kind == StreamKind::Telemetry) with_telemetry.insert(s.src);
  }

  for (std::size_t i = 0; i < c.uavs.size(); ++i) {
    const auto& u = c.uavs[i];
    if (u.mission.empty()) continue;
    const auto path = idx("uavs", i) + ".mission";
    if (!with_control.count(u.id)) fail(path, "requires a control stream to the UAV");
    if (!with_telemetry.count(u.id)) fail(path, "requires a telemetry stream from the UAV");
  }

  for (std::size_t i = 0; i < c.faults.size(); ++i) {
    const auto& f = c.faults[i];
    const auto path = idx("faults", i);
    if (!(f.at_s >= 0.0 && f.at_s < c.sim.duration_s)) fail(path + ".at_s", "must be within the run");
    if (!(f.duration_ms > 0.0)) fail(path + ".duration_ms", "must be > 0");
  }
  if (c.out_dir.empty()) fail("metrics.out_dir", "must not be empty");
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["sim"] = {{"duration_s", c.sim.duration_s},
              {"sync_mode", netsim::to_string(c.sim.sync_mode)},
              {"seed", c.sim.seed},
              {"tick_ms", c.sim.tick_ms},
              {"drain_s", c.sim.drain_s},
              {"logical_time", c.sim.logical_time}};
  j["origin"] = geo_json(c.origin);
  j["uavs"] = json::array();
  for (const auto& u : c.uavs) {
    json ifs = json::array();
    for (auto k : u.interfaces) ifs.push_back(netsim::to_string(k));
    json mission = json::array();
    for (const auto& s : u.mission) mission.push_back(step_json(s));
    j["uavs"].push_back({{"id", u.id}, {"home", geo_json(u.home)}, {"interfaces", ifs}, {"mission", mission}});
  }
  j["wifi"] = {{"ap_pos", xyz_json(c.wifi.ap_pos)}, {"tx_dbm", c.wifi.tx_dbm}, {"channel", channel_json(c.wifi.channel)}};
  j["d2d"] = {{"tx_dbm", c.d2d.tx_dbm}, {"channel", channel_json(c.d2d.channel)}};
  const auto& lp = c.lte.params;
  j["lte"] = {{"enb_pos", xyz_json(c.lte.enb_pos)},
              {"channel", channel_json(c.lte.channel)},
              {"params",
               {{"ul_bw_hz", lp.ul_bw_hz},
                {"dl_bw_hz", lp.dl_bw_hz},
                {"max_grant_period_ms", lp.max_grant_period_ms},
                {"max_ues", lp.max_ues},
                {"core_delay_ms", ns_to_ms(lp.core_delay_ns)},
                {"ue_tx_dbm", lp.ue_tx_dbm},
                {"enb_tx_dbm", lp.enb_tx_dbm},
                {"sensitivity_dbm", lp.sensitivity_dbm}}}};
  j["interferers"] = json::array();
  for (const auto& f : c.interferers) {
    json o{{"count", f.count},
           {"rate_mbps", f.rate_mbps},
           {"pkt_bytes", f.pkt_bytes},
           {"pos", xyz_json(f.pos)},
           {"velocity", xyz_json(f.velocity)},
           {"start_s", f.start_s},
           {"saturated", f.saturated}};
    if (std::isfinite(f.stop_s)) o["stop_s"] = f.stop_s;
    j["interferers"].push_back(o);
  }
  j["streams"] = json::array();
  for (const auto& s : c.streams) {
    json o{{"name", s.name},
           {"src", endpoint_json(s.src)},
           {"dst", endpoint_json(s.dst)},
           {"kind", to_string(s.kind)},
           {"iface", netsim::to_string(s.iface)},
           {"rate_hz", s.rate_hz},
           {"payload_bytes", s.payload_bytes}};
    if (s.kind == StreamKind::Frames) {
      o["gop"] = s.gop;
      o["i_frame_bytes"] = s.i_frame_bytes;
      o["p_frame_bytes"] = s.p_frame_bytes;
    }
    j["streams"].push_back(o);
  }
  j["faults"] = json::array();
  for (const auto& f : c.faults)
    j["faults"].push_back({{"kind", "netsim_stall"}, {"at_s", f.at_s}, {"duration_ms", f.duration_ms}});
  j["metrics"] = {{"out_dir", c.out_dir}};
  return j;
}

}  // namespace uavnet::scenario
