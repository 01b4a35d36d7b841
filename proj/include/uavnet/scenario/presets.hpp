#pragma once

#include <string>

#include "uavnet/scenario/config.hpp"

namespace uavnet::scenario {

/// Directory holding cs1.json … cs4.json; UAVNET_SCENARIO_DIR overrides the
/// build-time default.
std::string preset_dir();
/// Throws ScenarioError for names other than cs1..cs4.
ScenarioConfig load_preset(const std::string& name);

/// Replaces the interferer schedule with `n` contenders active for the whole
/// run, keeping the placement and load of the preset's first group.
void set_contenders(ScenarioConfig& cfg, int n);

/// Same scenario with every D2D stream sent directly over WiFi.
ScenarioConfig direct_variant(const ScenarioConfig& cfg);

}  // namespace uavnet::scenario
