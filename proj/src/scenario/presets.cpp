#include "uavnet/scenario/presets.hpp"

#include <cstdlib>
#include <filesystem>
#include <limits>

namespace uavnet::scenario {

std::string preset_dir() {
  if (const char* env = std::getenv("UAVNET_SCENARIO_DIR"); env && *env) return env;
  return UAVNET_DEFAULT_SCENARIO_DIR;
}

ScenarioConfig load_preset(const std::string& name) {
  if (name != "cs1" && name != "cs2" && name != "cs3" && name != "cs4")
    throw ScenarioError("case-study: unknown preset '" + name + "' (cs1|cs2|cs3|cs4)");
  return load_scenario((std::filesystem::path(preset_dir()) / (name + ".json")).string());
}

void set_contenders(ScenarioConfig& cfg, int n) {
  if (n < 0) throw ScenarioError("contenders: must be >= 0");
  netsim::InterfererConfig group;
  if (!cfg.interferers.empty()) group = cfg.interferers.front();
  group.count = n;
  group.start_s = 0.0;
  group.stop_s = std::numeric_limits<double>::infinity();
  cfg.interferers.clear();
  if (n > 0) cfg.interferers.push_back(group);
}

ScenarioConfig direct_variant(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  out.name = cfg.name + "-direct";
  for (auto& u : out.uavs)
    if (!u.has(netsim::IfaceKind::Wifi)) u.interfaces.push_back(netsim::IfaceKind::Wifi);
  for (auto& s : out.streams)
    if (s.iface == netsim::IfaceKind::D2d) s.iface = netsim::IfaceKind::Wifi;
  validate(out);
  return out;
}

}  // namespace uavnet::scenario
