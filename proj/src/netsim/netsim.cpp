#include "uavnet/netsim/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "uavnet/netsim/routing.hpp"

namespace uavnet::netsim {
namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

bool is_wired(int a, int b) {
  auto infra = [](int x) { return x == kApNodeId || x == kEnbNodeId; };
  return (a == kGcsNodeId && infra(b)) || (b == kGcsNodeId && infra(a));
}

}  // namespace

const char* to_string(IfaceKind k) {
  switch (k) {
    case IfaceKind::Wifi: return "wifi";
    case IfaceKind::Lte: return "lte";
    case IfaceKind::D2d: return "d2d";
  }
  return "?";
}

IfaceKind parse_iface(const std::string& s) {
  if (s == "wifi") return IfaceKind::Wifi;
  if (s == "lte") return IfaceKind::Lte;
  if (s == "d2d") return IfaceKind::D2d;
  throw NetError("unknown interface '" + s + "'");
}

const char* to_string(SyncMode m) {
  switch (m) {
    case SyncMode::Besteffort: return "besteffort";
    case SyncMode::Hardlimit: return "hardlimit";
    case SyncMode::FreezeAssist: return "freeze_assist";
  }
  return "?";
}

SyncMode parse_sync_mode(const std::string& s) {
  if (s == "besteffort") return SyncMode::Besteffort;
  if (s == "hardlimit") return SyncMode::Hardlimit;
  if (s == "freeze_assist") return SyncMode::FreezeAssist;
  throw NetError("unknown sync mode '" + s + "'");
}

bool NetNode::has(IfaceKind k) const {
  return std::find(ifaces.begin(), ifaces.end(), k) != ifaces.end();
}

void NetConfig::validate() const {
  wifi.validate();
  d2d.validate();
  lte.validate();
  wifi_channel.validate();
  d2d_channel.validate();
  lte_channel.validate();
  if (hardlimit_ns <= 0) throw NetError("hardlimit threshold must be > 0");
}

NetSim::NetSim(const Clock& clock, NetConfig cfg, std::uint64_t seed)
    : clock_(clock),
      cfg_(std::move(cfg)),
      rng_(derive_seed(seed, "netsim")),
      wifi_(cfg_.wifi, derive_seed(seed, "wifi-dcf")),
      d2d_(cfg_.d2d, derive_seed(seed, "d2d-dcf")),
      notifier_(std::make_shared<Notifier>()) {
  cfg_.validate();
}

void NetSim::add_node(int id, NodeRole role, const geo::LocalXY& pos,
                      std::vector<IfaceKind> ifaces) {
  std::lock_guard lk(nodes_mu_);
  if (nodes_.count(id)) throw NetError("duplicate node id " + std::to_string(id));
  nodes_.emplace(id, NetNode{id, role, pos, std::move(ifaces)});
}

void NetSim::set_position(int node_id, const geo::LocalXY& pos) {
  std::lock_guard lk(nodes_mu_);
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw NetError("unknown node " + std::to_string(node_id));
  it->second.pos = pos;
}

geo::LocalXY NetSim::pos_locked(int id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw NetError("unknown node " + std::to_string(id));
  return it->second.pos;
}

geo::LocalXY NetSim::position(int node_id) const {
  std::lock_guard lk(nodes_mu_);
  return pos_locked(node_id);
}

const NetNode& NetSim::node(int node_id) const {
  std::lock_guard lk(nodes_mu_);
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw NetError("unknown node " + std::to_string(node_id));
  return it->second;
}

std::vector<int> NetSim::uav_ids() const {
  std::lock_guard lk(nodes_mu_);
  std::vector<int> out;
  for (const auto& [id, n] : nodes_)
    if (n.role == NodeRole::Uav) out.push_back(id);
  return out;
}

int NetSim::lte_ue_count() const {
  std::lock_guard lk(nodes_mu_);
  int n = 0;
  for (const auto& [id, node] : nodes_)
    if (node.role == NodeRole::Uav && node.has(IfaceKind::Lte)) ++n;
  return n;
}

void NetSim::inject_interferer(const InterfererConfig& cfg, Nanos origin) {
  if (cfg.count < 0) throw NetError("interferer count must be >= 0");
  for (int i = 0; i < cfg.count; ++i) {
    DcfEngine::StationSpec spec;
    spec.frame_bytes = cfg.pkt_bytes;
    spec.saturated = cfg.saturated;
    spec.offered_mbps = cfg.rate_mbps;
    spec.active_from = origin + s_to_ns(cfg.start_s);
    if (std::isfinite(cfg.stop_s)) spec.active_until = origin + s_to_ns(cfg.stop_s);
    const std::size_t idx = wifi_.add_station(spec);
    const int id = kFirstInterfererId + static_cast<int>(interferers_.size());
    add_node(id, NodeRole::Interferer, cfg.pos, {IfaceKind::Wifi});
    interferers_.push_back(Interferer{idx, id, cfg.pos, cfg.velocity, spec.active_from});
  }
  update_interferers(wifi_.now());
}

void NetSim::update_interferers(Nanos t) {
  if (interferers_.empty()) return;
  geo::LocalXY ap;
  {
    std::lock_guard lk(nodes_mu_);
    ap = pos_locked(kApNodeId);
  }
  for (auto& it : interferers_) {
    const double dt = std::max<Nanos>(0, t - it.t_ref) / 1e9;
    const geo::LocalXY p{it.pos0.x + it.vel.x * dt, it.pos0.y + it.vel.y * dt,
                         it.pos0.z + it.vel.z * dt};
    set_position(it.node_id, p);
    // Carrier sensing uses the mean channel.
    const double rss = cfg_.wifi_tx_dbm - path_loss_db(geo::distance(p, ap), cfg_.wifi_channel);
    const auto rate = cfg_.wifi.rate_for(rss);
    wifi_.set_station_enabled(it.station, rate.has_value());
    if (rate) wifi_.set_station_rate(it.station, *rate);
  }
}

double NetSim::link_rss(int a, int b, IfaceKind iface) const {
  std::lock_guard lk(nodes_mu_);
  const double d = geo::distance(pos_locked(a), pos_locked(b));
  switch (iface) {
    case IfaceKind::Wifi: return cfg_.wifi_tx_dbm - path_loss_db(d, cfg_.wifi_channel);
    case IfaceKind::D2d: return cfg_.d2d_tx_dbm - path_loss_db(d, cfg_.d2d_channel);
    case IfaceKind::Lte: {
      const double tx = a == kEnbNodeId ? cfg_.lte.enb_tx_dbm : cfg_.lte.ue_tx_dbm;
      return tx - path_loss_db(d, cfg_.lte_channel);
    }
  }
  return -1e9;
}

std::optional<std::vector<int>> NetSim::route(int src, int dst, IfaceKind iface) const {
  const int hub = iface == IfaceKind::Lte ? kEnbNodeId : kApNodeId;
  if (iface != IfaceKind::D2d) {
    std::vector<int> path{src};
    if (src == kGcsNodeId) path.push_back(hub);
    if (path.back() != hub && dst != hub) path.push_back(hub);
    if (path.back() != dst) path.push_back(dst);
    return path;
  }
  Adjacency adj;
  std::vector<int> uavs;
  {
    std::lock_guard lk(nodes_mu_);
    for (const auto& [id, n] : nodes_)
      if (n.role == NodeRole::Uav && n.has(IfaceKind::D2d)) uavs.push_back(id);
  }
  adj[kApNodeId];
  for (int u : uavs) {
    if (link_rss(kApNodeId, u, IfaceKind::Wifi) >= cfg_.wifi.sensitivity_dbm) {
      adj[kApNodeId].push_back(u);
      adj[u].push_back(kApNodeId);
    }
    for (int v : uavs)
      if (v != u && link_rss(u, v, IfaceKind::D2d) >= cfg_.d2d.sensitivity_dbm)
        adj[u].push_back(v);
  }
  const int from = src == kGcsNodeId ? kApNodeId : src;
  const int to = dst == kGcsNodeId ? kApNodeId : dst;
  auto path = min_hop_route(adj, from, to);
  if (!path) return std::nullopt;
  if (src == kGcsNodeId) path->insert(path->begin(), kGcsNodeId);
  if (dst == kGcsNodeId) path->push_back(kGcsNodeId);
  return path;
}

bool NetSim::queue_admit(std::map<int, std::deque<Nanos>>& q, int node, Nanos t,
                         std::size_t cap) {
  auto& dq = q[node];
  while (!dq.empty() && dq.front() <= t) dq.pop_front();
  return dq.size() < cap;
}

bool NetSim::wifi_hop(Packet& p, int a, int b, Nanos& t) {
  const int sta = a == kApNodeId ? b : a;
  double d;
  geo::LocalXY sp;
  {
    std::lock_guard lk(nodes_mu_);
    sp = pos_locked(sta);
    d = geo::distance(pos_locked(a), pos_locked(b));
  }
  const double rss = rss_dbm(cfg_.wifi_tx_dbm, d, cfg_.wifi_channel, &rng_);
  rss_rows_.push_back({t, sta, kApNodeId, rss, sp.x, sp.y, sp.z});
  const auto rate = cfg_.wifi.rate_for(rss);
  if (!rate) {
    p.reason = "no-link";
    return false;
  }
  if (!queue_admit(wifi_q_, a, t, cfg_.wifi.queue_cap)) {
    p.reason = "queue-full";
    return false;
  }
  update_interferers(t);
  const auto r = wifi_.transmit(t, p.size_bytes, *rate);
  wifi_q_[a].push_back(r.t_done);
  if (!r.delivered) {
    p.reason = r.reason;
    return false;
  }
  p.serialization_ns += tx_time_ns(p.size_bytes, *rate);
  p.hop_delays.push_back(r.t_done - t);
  t = r.t_done;
  return true;
}

bool NetSim::d2d_hop(Packet& p, int a, int b, Nanos& t) {
  double d;
  geo::LocalXY ap;
  {
    std::lock_guard lk(nodes_mu_);
    ap = pos_locked(a);
    d = geo::distance(ap, pos_locked(b));
  }
  const double rss = rss_dbm(cfg_.d2d_tx_dbm, d, cfg_.d2d_channel, &rng_);
  rss_rows_.push_back({t, a, b, rss, ap.x, ap.y, ap.z});
  const auto rate = cfg_.d2d.rate_for(rss);
  if (!rate) {
    p.reason = "no-link";
    return false;
  }
  if (!queue_admit(d2d_q_, a, t, cfg_.d2d.queue_cap)) {
    p.reason = "queue-full";
    return false;
  }
  const auto r = d2d_.transmit(t, p.size_bytes, *rate);
  d2d_q_[a].push_back(r.t_done);
  if (!r.delivered) {
    p.reason = r.reason;
    return false;
  }
  p.serialization_ns += tx_time_ns(p.size_bytes, *rate);
  p.hop_delays.push_back(r.t_done - t);
  t = r.t_done;
  return true;
}

bool NetSim::lte_hop(Packet& p, int ue, LteDirection dir, Nanos& t) {
  double d;
  geo::LocalXY up;
  {
    std::lock_guard lk(nodes_mu_);
    up = pos_locked(ue);
    d = geo::distance(up, pos_locked(kEnbNodeId));
  }
  const double tx = dir == LteDirection::Ul ? cfg_.lte.ue_tx_dbm : cfg_.lte.enb_tx_dbm;
  const double rss = rss_dbm(tx, d, cfg_.lte_channel, &rng_);
  rss_rows_.push_back({t, ue, kEnbNodeId, rss, up.x, up.y, up.z});
  const auto r = lte_transfer(p.size_bytes, dir, lte_ue_count(), rss,
                              cfg_.lte_channel.noise_floor_dbm, cfg_.lte, rng_);
  if (!r.delivered) {
    p.reason = r.reason;
    return false;
  }
  p.serialization_ns += r.serialization_ns;
  p.hop_delays.push_back(r.delta_ns);
  t += r.delta_ns;
  return true;
}

Packet NetSim::transfer(Packet p) {
  p.hops.clear();
  p.hop_delays.clear();
  p.serialization_ns = 0;
  p.dropped = false;
  p.reason.clear();
  Nanos t = p.t0;
  const auto path = route(p.src_node, p.dst_node, p.iface);
  if (!path) {
    p.dropped = true;
    p.reason = "unreachable";
    p.delta_ns = 0;
    return p;
  }
  p.hops = *path;
  for (std::size_t i = 0; i + 1 < path->size(); ++i) {
    const int a = (*path)[i];
    const int b = (*path)[i + 1];
    bool ok = true;
    if (is_wired(a, b)) {
      p.hop_delays.push_back(0);
    } else if (a == kEnbNodeId || b == kEnbNodeId) {
      ok = a == kEnbNodeId ? lte_hop(p, b, LteDirection::Dl, t) : lte_hop(p, a, LteDirection::Ul, t);
    } else if (a == kApNodeId || b == kApNodeId) {
      ok = wifi_hop(p, a, b, t);
    } else {
      ok = d2d_hop(p, a, b, t);
    }
    if (!ok) {
      p.dropped = true;
      break;
    }
  }
  p.delta_ns = t - p.t0;
  return p;
}

void NetSim::submit(Packet pkt) {
  {
    std::lock_guard lk(inbox_mu_);
    const Nanos due = pkt.t0;
    inbox_.push_back(Event{due, 0, false, 0, std::move(pkt)});
    if (due < inbox_min_.load()) inbox_min_.store(due);
  }
  notifier_->notify();
}

void NetSim::inject_stall(Nanos at, Nanos duration) {
  {
    std::lock_guard lk(inbox_mu_);
    inbox_.push_back(Event{at, 0, true, duration, Packet{}});
    if (at < inbox_min_.load()) inbox_min_.store(at);
  }
  notifier_->notify();
}

void NetSim::refresh_heap_min() {
  heap_min_.store(heap_.empty() ? kNever : heap_.front().due);
}

Nanos NetSim::next_due() const { return std::min(heap_min_.load(), inbox_min_.load()); }

Nanos NetSim::current_lag(Nanos now) const {
  const Nanos oldest = std::min({exec_due_.load(), heap_min_.load(), inbox_min_.load()});
  return oldest == kNever ? 0 : std::max<Nanos>(0, now - oldest);
}

bool NetSim::service(Nanos now) {
  {
    std::lock_guard lk(inbox_mu_);
    for (auto& ev : inbox_) {
      ev.order = next_order_++;
      heap_.push_back(std::move(ev));
      std::push_heap(heap_.begin(), heap_.end(), Later{});
    }
    inbox_.clear();
    refresh_heap_min();
    inbox_min_.store(kNever);
  }
  bool did = false;
  while (!heap_.empty() && heap_.front().due <= now) {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    exec_due_.store(ev.due);
    refresh_heap_min();
    did = true;
    const Nanos t_exec = clock_.is_logical() ? now : clock_.now();
    const Nanos lateness = std::max<Nanos>(0, t_exec - ev.due);
    if (ev.stall) {
      if (!clock_.is_logical()) std::this_thread::sleep_for(std::chrono::nanoseconds(ev.stall_ns));
      exec_due_.store(kNever);
      continue;
    }
    lateness_.push_back(lateness);
    Delivery d;
    if (cfg_.mode == SyncMode::Hardlimit && lateness > cfg_.hardlimit_ns) {
      d.pkt = std::move(ev.pkt);
      d.pkt.dropped = true;
      d.pkt.reason = "late";
      d.pkt.delta_ns = 0;
    } else {
      d.pkt = transfer(std::move(ev.pkt));
    }
    d.t_exec = t_exec;
    d.lateness_ns = lateness;
    if (on_delivery_) on_delivery_(d);
    exec_due_.store(kNever);
  }
  return did;
}

void NetSim::write_rss_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw NetError("cannot write " + path);
  out << "t_ns,node_id,peer_id,rss_dbm,x_m,y_m,z_m\n";
  for (const auto& r : rss_rows_)
    out << fmt::format("{},{},{},{:.4f},{:.4f},{:.4f},{:.4f}\n", r.t_ns, r.node_id, r.peer_id,
                       r.rss_dbm, r.x_m, r.y_m, r.z_m);
}

}  // namespace uavnet::netsim
