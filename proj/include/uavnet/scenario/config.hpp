#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uavnet/gcs/ground_station.hpp"
#include "uavnet/geo/geo.hpp"
#include "uavnet/netsim/netsim.hpp"

namespace uavnet::scenario {

/// Validation error; the message starts with the offending field path.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stream endpoint id that stands for the ground station.
inline constexpr int kGcsEndpoint = -1;

struct SimConfig {
  double duration_s = 0.0;
  netsim::SyncMode sync_mode = netsim::SyncMode::Besteffort;
  std::uint64_t seed = 0;
  double tick_ms = 10.0;
  double drain_s = 1.0;  // frame sources stop this long before the end
  bool logical_time = false;
};

struct UavConfig {
  int id = 0;
  geo::GeoPos home;
  std::vector<netsim::IfaceKind> interfaces;
  std::vector<gcs::MissionStep> mission;

  bool has(netsim::IfaceKind k) const;
};

struct WifiConfig {
  geo::LocalXY ap_pos{0.0, 0.0, 2.0};
  double tx_dbm = 16.0;
  netsim::ChannelParams channel;
};

struct D2dConfig {
  double tx_dbm = 10.5;
  netsim::ChannelParams channel;
};

struct LteConfig {
  geo::LocalXY enb_pos{0.0, 0.0, 30.0};
  netsim::LteParams params;
  netsim::ChannelParams channel;
};

enum class StreamKind { Control, Telemetry, Frames };
const char* to_string(StreamKind k);

struct StreamConfig {
  std::string name;
  int src = kGcsEndpoint;
  int dst = kGcsEndpoint;
  StreamKind kind = StreamKind::Control;
  netsim::IfaceKind iface = netsim::IfaceKind::Wifi;
  double rate_hz = 10.0;            // control heartbeat cadence or frame rate
  std::size_t payload_bytes = 100;  // heartbeat padding or fragment size
  int gop = 12;
  std::size_t i_frame_bytes = 12000;
  std::size_t p_frame_bytes = 3000;

  int uav() const { return kind == StreamKind::Control ? dst : src; }
  std::string topic() const;
};

/// Netsim loop stall injected at a scheduled time.
struct FaultConfig {
  double at_s = 0.0;
  double duration_ms = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  SimConfig sim;
  geo::GeoPos origin = geo::GeoPos::make(33.6405, -117.8443, 0.0);
  std::vector<UavConfig> uavs;
  WifiConfig wifi;
  D2dConfig d2d;
  LteConfig lte;
  std::vector<netsim::InterfererConfig> interferers;
  std::vector<StreamConfig> streams;
  std::vector<FaultConfig> faults;
  std::string out_dir = "out";

  const UavConfig* uav(int id) const;
};

/// Parses and validates a scenario document. Unknown fields are rejected.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::string& path);
/// Throws ScenarioError naming the first violated constraint.
void validate(const ScenarioConfig& cfg);
/// Canonical document; parse_scenario(to_json(c).dump()) reproduces c.
nlohmann::json to_json(const ScenarioConfig& cfg);

}  // namespace uavnet::scenario
