#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavnet/bus/bus.hpp"
#include "uavnet/gcs/frames.hpp"
#include "uavnet/gcs/store.hpp"

namespace uavnet::gcs {

/// Fixed-cadence heartbeat traffic on a UAV's command topic.
struct ControlCadence {
  double rate_hz = 10.0;
  std::size_t payload_bytes = 100;
};

/// One mission entry: the command, then `hold_s` of waiting after it
/// completes before the next entry is issued.
struct MissionStep {
  flightsim::Command cmd;
  double hold_s = 0.0;
};

/// Gateway-protocol JSON builders.
nlohmann::json telemetry_event(const flightsim::Telemetry& t);
nlohmann::json cmd_status_event(int uav_id, std::uint64_t cmd_id, CmdStatus s);
nlohmann::json metric_event(const std::string& name, Nanos t_ns, double value,
                            nlohmann::json labels = nlohmann::json::object());
nlohmann::json freeze_event(bool frozen, Nanos t_ns);

/// Operator-side endpoint on the south bus: issues commands, keeps the
/// telemetry store, runs scripted missions and reassembles frame streams.
class GroundStation {
 public:
  using EventSink = std::function<void(const nlohmann::json&)>;
  using ReceiveHook = std::function<void(const bus::Envelope&)>;

  GroundStation(const Clock& clock, bus::Bus& south, std::size_t store_capacity = 1000);
  ~GroundStation();
  GroundStation(const GroundStation&) = delete;
  GroundStation& operator=(const GroundStation&) = delete;

  /// Registration; call before start().
  void add_uav(int uav_id);
  void set_control_cadence(int uav_id, ControlCadence cadence);
  void set_mission(int uav_id, std::vector<MissionStep> steps);
  FrameSink& add_frame_sink(int uav_id, const std::string& stream);
  void set_event_sink(EventSink sink);
  void set_receive_hook(ReceiveHook hook) { on_receive_ = std::move(hook); }

  void start(Nanos t_start);

  /// Publishes on gcs/cmd/<uav_id> and records a Pending history entry.
  /// Thread-safe. Throws GcsError for an unknown UAV.
  std::uint64_t send_command(int uav_id, flightsim::Command cmd);

  bool service(Nanos now);
  Nanos next_due() const;
  std::shared_ptr<Notifier> notifier() const { return notifier_; }

  bool has_uav(int uav_id) const { return uavs_.count(uav_id) != 0; }
  std::vector<int> uav_ids() const;
  const TelemetryStore& store() const { return store_; }
  const FrameSink* frame_sink(int uav_id, const std::string& stream) const;
  bool mission_done(int uav_id) const;
  std::uint64_t heartbeats_sent() const { return heartbeats_; }
  std::uint64_t telemetry_received() const { return telemetry_; }
  std::uint64_t malformed_received() const { return malformed_; }

 private:
  enum class Phase { Idle, AwaitDone, Hold, Done };
  struct UavEntry {
    std::optional<ControlCadence> cadence;
    Nanos next_heartbeat = 0;
    std::uint64_t heartbeat_seq = 0;
    std::vector<MissionStep> mission;
    std::size_t step = 0;
    Phase phase = Phase::Done;
    std::uint64_t cmd_id = 0;
    Nanos hold_until = 0;
  };

  void emit(const nlohmann::json& ev);
  void on_telemetry(const flightsim::Telemetry& t, Nanos now);
  bool advance_mission(int uav_id, UavEntry& u, Nanos now);
  bool step_complete(int uav_id, const UavEntry& u) const;

  const Clock& clock_;
  std::shared_ptr<bus::Endpoint> ep_;
  std::shared_ptr<bus::Subscription> inbox_;
  std::shared_ptr<bus::Subscription> freeze_inbox_;
  std::shared_ptr<Notifier> notifier_;
  TelemetryStore store_;
  std::map<int, UavEntry> uavs_;
  std::map<std::pair<int, std::string>, std::unique_ptr<FrameSink>> sinks_;
  std::mutex pub_mu_;
  std::mutex sink_mu_;
  EventSink event_sink_;
  ReceiveHook on_receive_;
  std::atomic<std::uint64_t> next_cmd_id_{1};
  bool started_ = false;
  std::uint64_t heartbeats_ = 0;
  std::uint64_t telemetry_ = 0;
  std::uint64_t malformed_ = 0;
};

}  // namespace uavnet::gcs
