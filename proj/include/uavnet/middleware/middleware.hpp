#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "uavnet/bus/bus.hpp"
#include "uavnet/geo/geo.hpp"
#include "uavnet/middleware/integrity.hpp"
#include "uavnet/netsim/netsim.hpp"

namespace uavnet::middleware {

class MiddlewareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which bus a route enters from. North faces the UAVs, south the GCS.
enum class Side { North, South };

/// Maps one bus topic to a network stream.
struct Route {
  std::string topic;
  std::string name;
  std::uint32_t stream_id = 0;
  Side from = Side::North;
  int src_node = 0;
  int dst_node = 0;
  netsim::IfaceKind iface = netsim::IfaceKind::Wifi;
};

struct FreezePolicy {
  netsim::SyncMode mode = netsim::SyncMode::Besteffort;
  Nanos freeze_threshold_ns = 50 * kNsPerMs;
  Nanos resume_hysteresis_ns = 10 * kNsPerMs;
  Nanos window_ns = 100 * kNsPerMs;
  Nanos poll_ns = kNsPerMs;

  void validate() const;
};

struct MiddlewareConfig {
  geo::GeoPos origin;  // anchor of the network simulator's local frame
  FreezePolicy freeze;
  Nanos epsilon_ns = kNsPerMs;
};

/// Per-packet synchronization record.
struct SyncRecord {
  std::uint32_t stream_id = 0;
  std::uint64_t seq = 0;
  Nanos t0 = 0;
  Nanos delta_ns = 0;
  Nanos t1 = 0;
  Nanos release_ns = 0;
  Nanos lateness_ns = 0;
  std::string hops;
  std::vector<Nanos> hop_delays;
  bool dropped = false;
  std::string reason;
  bool during_freeze = false;
};

struct AuditRecord {
  Nanos t_ns = 0;
  std::string topic;
  std::string reason;
};

struct FreezeEvent {
  Nanos t_start = 0;
  Nanos duration = 0;
};

struct PositionUpdate {
  Nanos t_gen_ns = 0;
  Nanos t_applied_ns = 0;
  int uav_id = 0;
  geo::LocalXY local;
};

struct ReleaseDecision {
  Nanos release_at = 0;
  Nanos lateness_ns = 0;
  bool waited = false;
};

/// Release rule for a packet stamped at t0, simulated delay Δ, handed back
/// by the simulator at t1: wait (Δ + t0 − t1) when positive, else release at
/// once and record the lateness.
ReleaseDecision decide_release(Nanos t0, Nanos delta, Nanos t1);

/// Sliding-window maximum of scheduler lag with freeze/resume hysteresis.
class FreezeController {
 public:
  enum class Action { None, Freeze, Resume };

  explicit FreezeController(FreezePolicy policy);
  Action observe(Nanos now, Nanos lag);
  bool frozen() const { return frozen_; }
  Nanos frozen_since() const { return since_; }

 private:
  FreezePolicy policy_;
  std::vector<std::pair<Nanos, Nanos>> window_;  // (t, lag), monotone deque
  bool frozen_ = false;
  Nanos since_ = 0;
};

/// Stamps packets entering the network simulator, applies the release rule
/// on the way out and drives freeze/resume of the flight simulator.
class Middleware {
 public:
  Middleware(const Clock& clock, bus::Bus& north, bus::Bus& south, netsim::NetSim& net,
             MiddlewareConfig cfg);
  ~Middleware();

  void add_route(Route r);
  /// Opens the bridge subscriptions. Routes added later still apply.
  void start();

  /// Bridge tasks: ingest every envelope waiting on one side.
  bool service_north(Nanos now);
  bool service_south(Nanos now);
  /// Release-timer task: hands off due packets and runs the freeze monitor.
  bool service_release(Nanos now);
  Nanos next_release_due() const;

  std::shared_ptr<Notifier> north_notifier() const { return north_notifier_; }
  std::shared_ptr<Notifier> south_notifier() const { return south_notifier_; }
  std::shared_ptr<Notifier> release_notifier() const { return release_notifier_; }

  /// Called on the release task for every finished record.
  void set_release_hook(std::function<void(const SyncRecord&)> h) { on_release_ = std::move(h); }

  IntegrityLedger& integrity() { return integrity_; }
  std::vector<SyncRecord> records() const;
  std::vector<AuditRecord> audit() const;
  std::vector<FreezeEvent> freeze_events() const;
  std::vector<PositionUpdate> position_updates() const;
  std::size_t in_flight() const;
  const Route* route_for_stream(std::uint32_t stream_id) const;
  std::vector<Route> routes() const;

  void write_delay_csv(const std::string& path) const;
  void write_position_csv(const std::string& path) const;

 private:
  struct Pending {
    Route route;
    bus::PayloadPtr payload;
    std::uint64_t origin_seq;
  };
  struct Ready {
    Nanos release_at;
    std::uint64_t order;
    SyncRecord rec;
    Pending pending;
  };
  struct Later {
    bool operator()(const Ready& a, const Ready& b) const {
      return a.release_at != b.release_at ? a.release_at > b.release_at : a.order > b.order;
    }
  };

  Nanos stamp(Nanos now) const { return clock_.is_logical() ? now : clock_.now(); }
  bool ingest(bus::Subscription& sub, Nanos now);
  void sync_position(const bus::Envelope& env, Nanos now);
  void on_delivery(const netsim::Delivery& d);
  void audit_drop(Nanos t, const std::string& topic, const std::string& reason);
  void publish_freeze(bool frozen, Nanos t, Nanos pause);

  const Clock& clock_;
  bus::Bus& north_;
  bus::Bus& south_;
  netsim::NetSim& net_;
  MiddlewareConfig cfg_;
  IntegrityLedger integrity_;
  FreezeController freeze_ctl_;

  std::shared_ptr<bus::Endpoint> north_ep_;
  std::shared_ptr<bus::Endpoint> south_ep_;
  std::shared_ptr<bus::Subscription> north_sub_;
  std::shared_ptr<bus::Subscription> south_sub_;
  std::shared_ptr<Notifier> north_notifier_;
  std::shared_ptr<Notifier> south_notifier_;
  std::shared_ptr<Notifier> release_notifier_;

  mutable std::mutex routes_mu_;
  std::map<std::string, Route, std::less<>> routes_;

  mutable std::mutex mu_;
  std::map<std::uint64_t, Pending> pending_;
  std::uint64_t next_token_ = 1;
  std::vector<Ready> ready_;
  std::uint64_t next_order_ = 0;
  std::vector<SyncRecord> records_;
  std::vector<AuditRecord> audit_;
  std::vector<FreezeEvent> freezes_;
  std::vector<PositionUpdate> positions_;
  std::function<void(const SyncRecord&)> on_release_;
  Nanos last_monitor_ = 0;
};

}  // namespace uavnet::middleware
