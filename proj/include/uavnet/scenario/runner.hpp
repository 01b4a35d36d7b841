#pragma once

#include <atomic>
#include <deque>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavnet/bus/bus.hpp"
#include "uavnet/flightsim/flightsim.hpp"
#include "uavnet/gcs/frames.hpp"
#include "uavnet/gcs/ground_station.hpp"
#include "uavnet/middleware/middleware.hpp"
#include "uavnet/netsim/netsim.hpp"
#include "uavnet/scenario/config.hpp"

namespace uavnet::scenario {

/// Runtime fault raised by a component task during a run.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Telemetry as generated on the UAV side, with the integrated state.
struct TelemetrySample {
  flightsim::Telemetry tel;
  double sim_time_s = 0.0;
  double flight_time_s = 0.0;
  geo::LocalXY local;  // relative to the scenario origin
};

struct StreamStats {
  std::string name;
  std::uint32_t stream_id = 0;
  StreamKind kind = StreamKind::Control;
  netsim::IfaceKind iface = netsim::IfaceKind::Wifi;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::map<std::string, std::uint64_t> dropped;  // by reason
  double mean_delta_ns = 0.0;
  double p99_delta_ns = 0.0;
  double var_delta_ns2 = 0.0;
  double mean_lateness_ns = 0.0;
};

struct FrameStats {
  std::string stream;
  int uav_id = 0;
  gcs::FrameMetrics metrics;
};

struct RunReport {
  std::string name;
  std::uint64_t seed = 0;
  bool logical_time = false;
  double duration_s = 0.0;
  double sim_time_s = 0.0;     // flight integration time
  double frozen_s = 0.0;
  double wall_time_s = 0.0;
  std::vector<StreamStats> streams;
  std::vector<FrameStats> frames;
  std::vector<middleware::FreezeEvent> freeze_events;
  std::uint64_t in_flight = 0;
  std::uint64_t audit_records = 0;
  std::uint64_t integrity_match = 0;
  std::uint64_t integrity_mismatch = 0;
  std::uint64_t commands_ack = 0;
  std::uint64_t commands_nack = 0;
  std::uint64_t commands_pending = 0;
  double p99_lateness_ms = 0.0;
  long peak_rss_kb = 0;

  const StreamStats* stream(const std::string& name) const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  std::optional<bool> logical_time;  // overrides sim.logical_time
  std::optional<std::string> out_dir;  // overrides metrics.out_dir
  bool write_traces = true;
};

/// Autogen: every component of a scenario, wired together.
class System {
 public:
  System(const ScenarioConfig& cfg, const Clock& clock);
  ~System();

  const ScenarioConfig& config() const { return cfg_; }
  bus::Bus& north() { return north_; }
  bus::Bus& south() { return south_; }
  flightsim::FlightSim& flight() { return flight_; }
  netsim::NetSim& net() { return net_; }
  middleware::Middleware& bridge() { return mw_; }
  gcs::GroundStation& gcs() { return gcs_; }
  const std::vector<std::unique_ptr<gcs::FrameSource>>& frame_sources() const { return sources_; }
  const std::deque<TelemetrySample>& telemetry() const { return telemetry_; }
  std::string stream_name(std::uint32_t stream_id) const;

  /// Receives aggregated metric events (gateway protocol) from the release task.
  void set_metric_sink(std::function<void(const nlohmann::json&)> sink);

  void start(Nanos t_start);
  /// Logical time: advance the manual clock through every due instant.
  void run_logical(ManualClock& clock, Nanos t_end);
  /// Real time: one thread per component until t_end or request_stop().
  void run_realtime(const WallClock& clock, Nanos t_end);
  void request_stop();

  Nanos t_start() const { return t_start_; }

 private:
  bool pump(Nanos t);
  Nanos next_due() const;
  void on_release(const middleware::SyncRecord& r);

  ScenarioConfig cfg_;
  const Clock& clock_;
  bus::Bus north_;
  bus::Bus south_;
  flightsim::FlightSim flight_;
  netsim::NetSim net_;
  middleware::Middleware mw_;
  gcs::GroundStation gcs_;
  std::vector<std::unique_ptr<gcs::FrameSource>> sources_;
  std::deque<TelemetrySample> telemetry_;  // appended on the flight task; no bulk reallocation
  std::map<std::uint32_t, std::string> stream_names_;
  Nanos t_start_ = 0;
  std::atomic<bool> stop_{false};

  struct MetricAcc {
    double sum_ms = 0.0;
    std::uint64_t n = 0;
    Nanos last_emit = 0;
  };
  std::mutex metric_mu_;
  std::function<void(const nlohmann::json&)> metric_sink_;
  std::map<std::uint32_t, MetricAcc> metric_acc_;
};

/// Owns the clock and the system for one run.
class Runner {
 public:
  explicit Runner(ScenarioConfig cfg, RunOptions opts = {});
  ~Runner();

  System& system() { return *system_; }
  bool logical() const { return logical_; }
  const std::string& out_dir() const { return out_dir_; }

  /// Blocks for the scenario duration (real time) or until done (logical).
  /// Writes traces when enabled. Throws RunError on a component fault.
  RunReport run();
  void request_stop() { system_->request_stop(); }

 private:
  RunReport build_report(double wall_s) const;
  void write_traces(const RunReport& report) const;

  ScenarioConfig cfg_;
  RunOptions opts_;
  bool logical_;
  std::string out_dir_;
  std::unique_ptr<Clock> clock_;
  std::unique_ptr<System> system_;
};

/// Convenience: construct a runner and run it.
RunReport run(const ScenarioConfig& cfg, RunOptions opts = {});

/// Peak resident set size of this process in KiB.
long peak_rss_kb();

}  // namespace uavnet::scenario
