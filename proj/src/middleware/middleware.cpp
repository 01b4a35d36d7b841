#include "uavnet/middleware/middleware.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "uavnet/flightsim/codec.hpp"
#include "uavnet/flightsim/topics.hpp"

namespace uavnet::middleware {
namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

bool is_telemetry_topic(std::string_view topic) {
  constexpr std::string_view suffix = "/telemetry";
  return topic.size() > suffix.size() && topic.substr(0, 4) == "uav/" &&
         topic.substr(topic.size() - suffix.size()) == suffix;
}

std::string join_hops(const std::vector<int>& hops) {
  std::string out;
  for (std::size_t i = 0; i < hops.size(); ++i) {
    if (i) out += '>';
    out += std::to_string(hops[i]);
  }
  return out;
}

}  // namespace

ReleaseDecision decide_release(Nanos t0, Nanos delta, Nanos t1) {
  ReleaseDecision d;
  const Nanos wait = delta + t0 - t1;
  d.waited = wait > 0;
  d.release_at = d.waited ? t1 + wait : t1;
  d.lateness_ns = d.waited ? 0 : -wait;
  return d;
}

void FreezePolicy::validate() const {
  if (freeze_threshold_ns <= 0) throw MiddlewareError("freeze_threshold must be > 0");
  if (resume_hysteresis_ns <= 0) throw MiddlewareError("resume_hysteresis must be > 0");
  if (window_ns <= 0 || poll_ns <= 0) throw MiddlewareError("monitor window and poll must be > 0");
}

FreezeController::FreezeController(FreezePolicy policy) : policy_(policy) { policy_.validate(); }

FreezeController::Action FreezeController::observe(Nanos now, Nanos lag) {
  if (policy_.mode != netsim::SyncMode::FreezeAssist) return Action::None;
  if (frozen_) {
    if (lag < policy_.resume_hysteresis_ns) {
      frozen_ = false;
      window_.clear();
      return Action::Resume;
    }
    return Action::None;
  }
  while (!window_.empty() && window_.back().second <= lag) window_.pop_back();
  window_.emplace_back(now, lag);
  while (window_.front().first < now - policy_.window_ns) window_.erase(window_.begin());
  if (window_.front().second > policy_.freeze_threshold_ns) {
    frozen_ = true;
    since_ = now;
    window_.clear();
    return Action::Freeze;
  }
  return Action::None;
}

Middleware::Middleware(const Clock& clock, bus::Bus& north, bus::Bus& south, netsim::NetSim& net,
                       MiddlewareConfig cfg)
    : clock_(clock),
      north_(north),
      south_(south),
      net_(net),
      cfg_(cfg),
      freeze_ctl_(cfg.freeze),
      north_notifier_(std::make_shared<Notifier>()),
      south_notifier_(std::make_shared<Notifier>()),
      release_notifier_(std::make_shared<Notifier>()) {
  if (!cfg_.origin.valid()) throw MiddlewareError("invalid local-frame origin");
  north_ep_ = north_.open_endpoint();
  south_ep_ = south_.open_endpoint();
  net_.set_delivery_handler([this](const netsim::Delivery& d) { on_delivery(d); });
}

Middleware::~Middleware() {
  net_.set_delivery_handler(nullptr);
  north_ep_->close();
  south_ep_->close();
}

void Middleware::add_route(Route r) {
  bus::Topic::parse(r.topic);
  std::lock_guard lk(routes_mu_);
  for (const auto& [t, existing] : routes_)
    if (existing.stream_id == r.stream_id)
      throw MiddlewareError("duplicate stream id " + std::to_string(r.stream_id));
  if (!routes_.emplace(r.topic, r).second)
    throw MiddlewareError("duplicate route for topic " + r.topic);
}

std::vector<Route> Middleware::routes() const {
  std::lock_guard lk(routes_mu_);
  std::vector<Route> out;
  for (const auto& [t, r] : routes_) out.push_back(r);
  return out;
}

const Route* Middleware::route_for_stream(std::uint32_t stream_id) const {
  std::lock_guard lk(routes_mu_);
  for (const auto& [t, r] : routes_)
    if (r.stream_id == stream_id) return &r;
  return nullptr;
}

void Middleware::start() {
  north_sub_ = north_ep_->subscribe("uav");
  north_sub_->set_notifier(north_notifier_);
  south_sub_ = south_ep_->subscribe("gcs");
  south_sub_->set_notifier(south_notifier_);
}

void Middleware::audit_drop(Nanos t, const std::string& topic, const std::string& reason) {
  std::lock_guard lk(mu_);
  audit_.push_back({t, topic, reason});
}

void Middleware::sync_position(const bus::Envelope& env, Nanos now) {
  flightsim::Telemetry tel;
  try {
    tel = flightsim::decode_telemetry(env.text());
    const auto local = geo::to_local(cfg_.origin, tel.pos);
    net_.set_position(tel.uav_id, local);
    const Nanos applied = stamp(now);
    std::lock_guard lk(mu_);
    positions_.push_back({tel.t_gen, applied, tel.uav_id, local});
  } catch (const std::exception& e) {
    audit_drop(stamp(now), env.topic.str(), std::string("malformed-telemetry: ") + e.what());
  }
}

bool Middleware::ingest(bus::Subscription& sub, Nanos now) {
  auto envs = sub.try_poll();
  for (const auto& env : envs) {
    const auto& topic = env.topic.str();
    if (is_telemetry_topic(topic)) sync_position(env, now);
    std::optional<Route> route;
    {
      std::lock_guard lk(routes_mu_);
      auto it = routes_.find(topic);
      if (it != routes_.end()) route = it->second;
    }
    const Nanos t0 = stamp(now);
    if (!route) {
      audit_drop(t0, topic, "unmapped");
      continue;
    }
    integrity_.record(route->stream_id, env.seq, env.bytes());
    netsim::Packet pkt;
    pkt.stream_id = route->stream_id;
    pkt.seq = env.seq;
    pkt.size_bytes = env.payload->size();
    pkt.src_node = route->src_node;
    pkt.dst_node = route->dst_node;
    pkt.iface = route->iface;
    pkt.t0 = t0;
    {
      std::lock_guard lk(mu_);
      pkt.token = next_token_++;
      pending_.emplace(pkt.token, Pending{*route, env.payload, env.seq});
    }
    net_.submit(std::move(pkt));
  }
  return !envs.empty();
}

bool Middleware::service_north(Nanos now) { return north_sub_ && ingest(*north_sub_, now); }
bool Middleware::service_south(Nanos now) { return south_sub_ && ingest(*south_sub_, now); }

void Middleware::on_delivery(const netsim::Delivery& d) {
  const auto& p = d.pkt;
  SyncRecord rec;
  rec.stream_id = p.stream_id;
  rec.seq = p.seq;
  rec.t0 = p.t0;
  rec.delta_ns = p.delta_ns;
  rec.t1 = d.t_exec;
  rec.hops = join_hops(p.hops);
  rec.hop_delays = p.hop_delays;
  rec.dropped = p.dropped;
  rec.reason = p.reason;
  const auto decision = decide_release(rec.t0, rec.delta_ns, rec.t1);
  rec.lateness_ns = decision.lateness_ns;
  const Nanos release_at = p.dropped ? rec.t1 : decision.release_at;
  {
    std::lock_guard lk(mu_);
    auto it = pending_.find(p.token);
    if (it == pending_.end()) return;
    ready_.push_back(Ready{release_at, next_order_++, std::move(rec), std::move(it->second)});
    std::push_heap(ready_.begin(), ready_.end(), Later{});
    pending_.erase(it);
  }
  release_notifier_->notify();
}

void Middleware::publish_freeze(bool frozen, Nanos t, Nanos pause) {
  flightsim::FreezeSignal s{frozen, t, pause};
  auto payload = bus::make_payload(flightsim::encode_freeze(s));
  north_ep_->publish(flightsim::kFreezeTopic, payload);
  south_ep_->publish(flightsim::kFreezeTopic, payload);
}

bool Middleware::service_release(Nanos now) {
  bool did = false;
  std::vector<Ready> due;
  {
    std::lock_guard lk(mu_);
    const Nanos t = stamp(now);
    while (!ready_.empty() && ready_.front().release_at <= t) {
      std::pop_heap(ready_.begin(), ready_.end(), Later{});
      due.push_back(std::move(ready_.back()));
      ready_.pop_back();
    }
  }
  for (auto& r : due) {
    did = true;
    auto& rec = r.rec;
    rec.during_freeze = freeze_ctl_.frozen();
    if (rec.dropped) {
      rec.release_ns = rec.t1;
    } else {
      auto& ep = r.pending.route.from == Side::North ? south_ep_ : north_ep_;
      rec.release_ns = stamp(now);
      const auto ack =
          ep->publish(r.pending.route.topic, r.pending.payload, rec.stream_id, r.pending.origin_seq);
      if (ack.delivered_to == 0) {
        rec.dropped = true;
        rec.reason = "no-subscriber";
        audit_drop(rec.release_ns, r.pending.route.topic, "no-subscriber");
      }
    }
    if (on_release_) on_release_(rec);
    std::lock_guard lk(mu_);
    records_.push_back(std::move(rec));
  }

  if (cfg_.freeze.mode == netsim::SyncMode::FreezeAssist) {
    const Nanos t = stamp(now);
    last_monitor_ = t;
    switch (freeze_ctl_.observe(t, net_.current_lag(t))) {
      case FreezeController::Action::Freeze:
        publish_freeze(true, t, 0);
        did = true;
        break;
      case FreezeController::Action::Resume: {
        const Nanos since = freeze_ctl_.frozen_since();
        publish_freeze(false, t, t - since);
        std::lock_guard lk(mu_);
        freezes_.push_back({since, t - since});
        did = true;
        break;
      }
      case FreezeController::Action::None:
        break;
    }
  }
  return did;
}

Nanos Middleware::next_release_due() const {
  Nanos due = kNever;
  {
    std::lock_guard lk(mu_);
    if (!ready_.empty()) due = ready_.front().release_at;
  }
  if (cfg_.freeze.mode == netsim::SyncMode::FreezeAssist && !clock_.is_logical())
    due = std::min(due, last_monitor_ + cfg_.freeze.poll_ns);
  return due;
}

std::vector<SyncRecord> Middleware::records() const {
  std::lock_guard lk(mu_);
  return records_;
}

std::vector<AuditRecord> Middleware::audit() const {
  std::lock_guard lk(mu_);
  return audit_;
}

std::vector<FreezeEvent> Middleware::freeze_events() const {
  std::lock_guard lk(mu_);
  auto out = freezes_;
  if (freeze_ctl_.frozen()) out.push_back({freeze_ctl_.frozen_since(), -1});
  return out;
}

std::vector<PositionUpdate> Middleware::position_updates() const {
  std::lock_guard lk(mu_);
  return positions_;
}

std::size_t Middleware::in_flight() const {
  std::lock_guard lk(mu_);
  return pending_.size() + ready_.size();
}

void Middleware::write_delay_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw MiddlewareError("cannot write " + path);
  out << "stream_id,seq,t0_ns,delta_ns,release_ns,lateness_ns,hops,dropped,reason\n";
  for (const auto& r : records())
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.stream_id, r.seq, r.t0, r.delta_ns,
                       r.release_ns, r.lateness_ns, r.hops, r.dropped ? 1 : 0, r.reason);
}

void Middleware::write_position_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw MiddlewareError("cannot write " + path);
  out << "t_gen_ns,t_applied_ns,uav_id,x_m,y_m,z_m\n";
  for (const auto& p : position_updates())
    out << fmt::format("{},{},{},{:.4f},{:.4f},{:.4f}\n", p.t_gen_ns, p.t_applied_ns, p.uav_id,
                       p.local.x, p.local.y, p.local.z);
}

}  // namespace uavnet::middleware
