#pragma once

#include <string>

namespace uavnet::flightsim {

inline constexpr const char* kFreezeTopic = "sys/freeze";

inline std::string command_topic(int uav_id) { return "gcs/cmd/" + std::to_string(uav_id); }
inline std::string telemetry_topic(int uav_id) {
  return "uav/" + std::to_string(uav_id) + "/telemetry";
}
inline std::string frame_topic(int uav_id, const std::string& stream) {
  return "uav/" + std::to_string(uav_id) + "/frames/" + stream;
}

}  // namespace uavnet::flightsim
