#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "uavnet/core/clock.hpp"
#include "uavnet/core/notifier.hpp"
#include "uavnet/core/rng.hpp"
#include "uavnet/geo/geo.hpp"
#include "uavnet/netsim/channel.hpp"
#include "uavnet/netsim/lte.hpp"
#include "uavnet/netsim/wifi.hpp"

namespace uavnet::netsim {

enum class NodeRole { Uav, Ap, EnodeB, Gcs, Interferer };
enum class IfaceKind { Wifi, Lte, D2d };
enum class SyncMode { Besteffort, Hardlimit, FreezeAssist };

const char* to_string(IfaceKind k);
IfaceKind parse_iface(const std::string& s);
const char* to_string(SyncMode m);
SyncMode parse_sync_mode(const std::string& s);

inline constexpr int kGcsNodeId = 10000;
inline constexpr int kApNodeId = 10001;
inline constexpr int kEnbNodeId = 10002;
inline constexpr int kFirstInterfererId = 10100;

struct NetNode {
  int id = 0;
  NodeRole role = NodeRole::Uav;
  geo::LocalXY pos;
  std::vector<IfaceKind> ifaces;
  bool has(IfaceKind k) const;
};

struct Packet {
  std::uint32_t stream_id = 0;
  std::uint64_t seq = 0;
  std::size_t size_bytes = 0;
  int src_node = 0;
  int dst_node = 0;
  IfaceKind iface = IfaceKind::Wifi;
  Nanos t0 = 0;
  Nanos delta_ns = 0;
  std::vector<int> hops;
  std::vector<Nanos> hop_delays;
  Nanos serialization_ns = 0;  // lower bound: sum of per-hop T_tx
  bool dropped = false;
  std::string reason;
  std::uint64_t token = 0;  // opaque handle for the submitter
};

struct Delivery {
  Packet pkt;
  Nanos t_exec = 0;
  Nanos lateness_ns = 0;
};

struct InterfererConfig {
  int count = 0;
  double rate_mbps = 10.0;  // offered load per station
  std::size_t pkt_bytes = 1000;
  geo::LocalXY pos;
  geo::LocalXY velocity;  // m/s, constant
  double start_s = 0.0;
  double stop_s = std::numeric_limits<double>::infinity();
  bool saturated = false;
};

struct NetConfig {
  WifiParams wifi;
  ChannelParams wifi_channel;
  double wifi_tx_dbm = 16.0;
  WifiParams d2d;
  ChannelParams d2d_channel;
  double d2d_tx_dbm = 10.5;
  LteParams lte;
  ChannelParams lte_channel;
  SyncMode mode = SyncMode::Besteffort;
  Nanos hardlimit_ns = 10 * kNsPerMs;

  void validate() const;
};

struct RssRow {
  Nanos t_ns;
  int node_id;
  int peer_id;
  double rss_dbm;
  double x_m;
  double y_m;
  double z_m;
};

/// Discrete-event network simulator aligned to a clock.
///
/// Packets enter through submit() and become events due at their ingress
/// time t0. Executing a packet event computes its network delay Δ from the
/// medium models at t0 and hands the result to the delivery handler; the
/// caller applies the release rule. All state belongs to the loop thread
/// except the inbox, positions and the lag gauge, which are locked or atomic.
class NetSim {
 public:
  using DeliveryHandler = std::function<void(const Delivery&)>;

  NetSim(const Clock& clock, NetConfig cfg, std::uint64_t seed);

  void add_node(int id, NodeRole role, const geo::LocalXY& pos, std::vector<IfaceKind> ifaces);
  /// Throws NetError on an unknown node. Effective for every transmission
  /// executed afterwards.
  void set_position(int node_id, const geo::LocalXY& pos);
  geo::LocalXY position(int node_id) const;
  const NetNode& node(int node_id) const;
  std::vector<int> uav_ids() const;

  /// Adds `count` paced DCF stations to the WiFi medium. Time offsets are
  /// relative to `origin`.
  void inject_interferer(const InterfererConfig& cfg, Nanos origin = 0);

  void set_delivery_handler(DeliveryHandler h) { on_delivery_ = std::move(h); }

  /// Thread-safe. The event is due at pkt.t0.
  void submit(Packet pkt);
  /// Thread-safe fault injection: blocks the loop for `duration` when the
  /// event executes (real-time clocks only).
  void inject_stall(Nanos at, Nanos duration);

  /// Executes every event due at `now`. Loop thread only.
  bool service(Nanos now);
  /// Earliest pending due time, or INT64 max.
  Nanos next_due() const;
  std::shared_ptr<Notifier> notifier() const { return notifier_; }
  /// Thread-safe: how far the loop trails `now` (executing or oldest
  /// pending event), 0 when caught up.
  Nanos current_lag(Nanos now) const;

  /// Computes Δ for a packet as if ingressed at pkt.t0 (loop thread).
  Packet transfer(Packet pkt);
  std::optional<std::vector<int>> route(int src, int dst, IfaceKind iface) const;
  double link_rss(int a, int b, IfaceKind iface) const;  // deterministic part

  const std::vector<Nanos>& lateness_samples() const { return lateness_; }
  const std::vector<RssRow>& rss_rows() const { return rss_rows_; }
  void write_rss_csv(const std::string& path) const;
  double wifi_busy_fraction() const { return wifi_.busy_fraction(); }
  std::size_t interferer_count() const { return interferers_.size(); }
  int lte_ue_count() const;
  const NetConfig& config() const { return cfg_; }

 private:
  struct Event {
    Nanos due;
    std::uint64_t order;
    bool stall;
    Nanos stall_ns;
    Packet pkt;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.due != b.due ? a.due > b.due : a.order > b.order;
    }
  };
  struct Interferer {
    std::size_t station;
    int node_id;
    geo::LocalXY pos0;
    geo::LocalXY vel;
    Nanos t_ref;
  };

  bool wifi_hop(Packet& p, int a, int b, Nanos& t);
  bool d2d_hop(Packet& p, int a, int b, Nanos& t);
  bool lte_hop(Packet& p, int ue, LteDirection dir, Nanos& t);
  bool queue_admit(std::map<int, std::deque<Nanos>>& q, int node, Nanos t, std::size_t cap);
  void update_interferers(Nanos t);
  geo::LocalXY pos_locked(int id) const;
  void refresh_heap_min();

  const Clock& clock_;
  NetConfig cfg_;
  Rng rng_;
  DcfEngine wifi_;
  DcfEngine d2d_;

  mutable std::mutex nodes_mu_;
  std::map<int, NetNode> nodes_;
  std::vector<Interferer> interferers_;

  std::mutex inbox_mu_;
  std::vector<Event> inbox_;
  std::atomic<Nanos> inbox_min_{std::numeric_limits<Nanos>::max()};
  std::uint64_t next_order_ = 0;
  std::vector<Event> heap_;
  std::atomic<Nanos> heap_min_{std::numeric_limits<Nanos>::max()};
  std::atomic<Nanos> exec_due_{std::numeric_limits<Nanos>::max()};
  std::shared_ptr<Notifier> notifier_;

  std::map<int, std::deque<Nanos>> wifi_q_;
  std::map<int, std::deque<Nanos>> d2d_q_;
  DeliveryHandler on_delivery_;
  std::vector<Nanos> lateness_;
  std::vector<RssRow> rss_rows_;
};

}  // namespace uavnet::netsim
