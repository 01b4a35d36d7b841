#include "uavnet/scenario/runner.hpp"

#include <sys/resource.h>
#include <pthread.h>
#include <sched.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "uavnet/core/stats.hpp"
#include "uavnet/flightsim/topics.hpp"

namespace uavnet::scenario {

namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();
constexpr Nanos kMetricPeriodNs = 100 * kNsPerMs;

flightsim::VehicleParams vehicle_params(const ScenarioConfig& c) {
  flightsim::VehicleParams p;
  p.tick_s = c.sim.tick_ms / 1000.0;
  return p;
}

netsim::NetConfig net_config(const ScenarioConfig& c) {
  netsim::NetConfig n;
  n.wifi_channel = c.wifi.channel;
  n.wifi_tx_dbm = c.wifi.tx_dbm;
  n.d2d_channel = c.d2d.channel;
  n.d2d_tx_dbm = c.d2d.tx_dbm;
  n.lte = c.lte.params;
  n.lte_channel = c.lte.channel;
  n.mode = c.sim.sync_mode;
  return n;
}

middleware::MiddlewareConfig mw_config(const ScenarioConfig& c) {
  middleware::MiddlewareConfig m;
  m.origin = c.origin;
  m.freeze.mode = c.sim.sync_mode;
  return m;
}

bool uses(const ScenarioConfig& c, netsim::IfaceKind k) {
  return std::any_of(c.uavs.begin(), c.uavs.end(), [&](const UavConfig& u) { return u.has(k); });
}

}  // namespace

System::System(const ScenarioConfig& cfg, const Clock& clock)
    : cfg_(cfg),
      clock_(clock),
      north_(clock),
      south_(clock),
      flight_(clock, north_, vehicle_params(cfg)),
      net_(clock, net_config(cfg), cfg.sim.seed),
      mw_(clock, north_, south_, net_, mw_config(cfg)),
      gcs_(clock, south_) {
  using netsim::IfaceKind;
  using netsim::NodeRole;
  validate(cfg_);

  net_.add_node(netsim::kGcsNodeId, NodeRole::Gcs, cfg_.wifi.ap_pos, {});
  if (uses(cfg_, IfaceKind::Wifi) || uses(cfg_, IfaceKind::D2d))
    net_.add_node(netsim::kApNodeId, NodeRole::Ap, cfg_.wifi.ap_pos, {IfaceKind::Wifi});
  if (uses(cfg_, IfaceKind::Lte))
    net_.add_node(netsim::kEnbNodeId, NodeRole::EnodeB, cfg_.lte.enb_pos, {IfaceKind::Lte});

  for (const auto& u : cfg_.uavs) {
    flight_.spawn_uav(u.id, u.home);
    net_.add_node(u.id, NodeRole::Uav, geo::to_local(cfg_.origin, u.home), u.interfaces);
    gcs_.add_uav(u.id);
    if (!u.mission.empty()) gcs_.set_mission(u.id, u.mission);
  }

  for (std::size_t i = 0; i < cfg_.streams.size(); ++i) {
    const auto& s = cfg_.streams[i];
    const auto stream_id = static_cast<std::uint32_t>(i + 1);
    stream_names_[stream_id] = s.name;
    middleware::Route r;
    r.topic = s.topic();
    r.name = s.name;
    r.stream_id = stream_id;
    r.from = s.kind == StreamKind::Control ? middleware::Side::South : middleware::Side::North;
    r.src_node = s.src == kGcsEndpoint ? netsim::kGcsNodeId : s.src;
    r.dst_node = s.dst == kGcsEndpoint ? netsim::kGcsNodeId : s.dst;
    r.iface = s.iface;
    mw_.add_route(r);
    switch (s.kind) {
      case StreamKind::Control:
        gcs_.set_control_cadence(s.dst, {s.rate_hz, s.payload_bytes});
        break;
      case StreamKind::Telemetry:
        break;
      case StreamKind::Frames: {
        gcs::FrameStreamConfig fc;
        fc.name = s.name;
        fc.uav_id = s.src;
        fc.fps = s.rate_hz;
        fc.gop = s.gop;
        fc.i_frame_bytes = s.i_frame_bytes;
        fc.p_frame_bytes = s.p_frame_bytes;
        fc.fragment_bytes = s.payload_bytes;
        fc.stop_s = cfg_.sim.duration_s - cfg_.sim.drain_s;
        sources_.push_back(std::make_unique<gcs::FrameSource>(north_, fc));
        gcs_.add_frame_sink(s.src, s.name);
        break;
      }
    }
  }

  flight_.set_telemetry_hook([this](const flightsim::Telemetry& t, const flightsim::UavState& st) {
    telemetry_.push_back({t, st.sim_time_s, st.flight_time_s, geo::to_local(cfg_.origin, t.pos)});
  });
  auto verify = [this](const bus::Envelope& env) {
    if (env.stream_id != 0) mw_.integrity().verify(env.stream_id, env.origin_seq, env.bytes());
  };
  flight_.set_uplink_hook(verify);
  gcs_.set_receive_hook(verify);
  mw_.set_release_hook([this](const middleware::SyncRecord& r) { on_release(r); });
}

System::~System() = default;

std::string System::stream_name(std::uint32_t stream_id) const {
  auto it = stream_names_.find(stream_id);
  return it == stream_names_.end() ? std::string() : it->second;
}

void System::set_metric_sink(std::function<void(const nlohmann::json&)> sink) {
  std::lock_guard lk(metric_mu_);
  metric_sink_ = std::move(sink);
}

void System::on_release(const middleware::SyncRecord& r) {
  std::lock_guard lk(metric_mu_);
  if (!metric_sink_ || r.dropped) return;
  auto& acc = metric_acc_[r.stream_id];
  acc.sum_ms += ns_to_ms(r.delta_ns);
  ++acc.n;
  if (r.release_ns - acc.last_emit < kMetricPeriodNs) return;
  metric_sink_(gcs::metric_event("delay_ms", r.release_ns, acc.sum_ms / static_cast<double>(acc.n),
                                 {{"stream", stream_name(r.stream_id)}}));
  acc = MetricAcc{0.0, 0, r.release_ns};
}

void System::start(Nanos t_start) {
  t_start_ = t_start;
  for (const auto& f : cfg_.interferers) net_.inject_interferer(f, t_start);
  for (const auto& f : cfg_.faults)
    net_.inject_stall(t_start + s_to_ns(f.at_s), ms_to_ns(f.duration_ms));
  mw_.start();
  flight_.start(t_start);
  for (auto& s : sources_) s->start(t_start);
  gcs_.start(t_start);
}

bool System::pump(Nanos t) {
  bool any = false;
  for (bool again = true; again;) {
    again = false;
    again |= flight_.service(t);
    for (auto& s : sources_) again |= s->service(t);
    again |= mw_.service_north(t);
    again |= mw_.service_south(t);
    again |= net_.service(t);
    again |= mw_.service_release(t);
    again |= gcs_.service(t);
    any |= again;
  }
  return any;
}

Nanos System::next_due() const {
  Nanos due = std::min({flight_.next_due(), net_.next_due(), mw_.next_release_due(), gcs_.next_due()});
  for (const auto& s : sources_) due = std::min(due, s->next_due());
  return due;
}

void System::run_logical(ManualClock& clock, Nanos t_end) {
  clock.set(t_start_);
  pump(t_start_);
  while (!stop_) {
    const Nanos next = next_due();
    if (next > t_end) break;
    const Nanos t = std::max(next, clock.now());
    clock.set(t);
    pump(t);
  }
  clock.set(t_end);
  pump(t_end);
}

void System::request_stop() {
  stop_ = true;
  for (const auto& n : {flight_.notifier(), net_.notifier(), mw_.north_notifier(), mw_.south_notifier(),
                        mw_.release_notifier(), gcs_.notifier()})
    n->notify();
}

namespace {

// Scheduling class requested by a real-time task. Refusal (no privilege)
// leaves the default policy.
//   Tick:     flight and bridge tasks; SCHED_RR so wakeups are not queued
//             behind other work on the host, else nice -10.
//   Timer:    release timer, nice -10.
//   Loop:     network event loop, nice -5.
enum class Sched { Default, Loop, Timer, Tick };

void apply_sched(Sched s) {
  if (s == Sched::Default) return;
  if (s == Sched::Tick) {
    sched_param sp{};
    sp.sched_priority = 1;
    if (pthread_setschedparam(pthread_self(), SCHED_RR, &sp) == 0) return;
  }
  setpriority(PRIO_PROCESS, static_cast<id_t>(gettid()), s == Sched::Loop ? -5 : -10);
}

}  // namespace

void System::run_realtime(const WallClock& clock, Nanos t_end) {
  std::mutex fault_mu;
  std::exception_ptr fault;

  auto loop = [&](const std::shared_ptr<Notifier>& n, auto service, auto due, Sched sched = Sched::Default) {
    return [&, n, service, due, sched] {
      apply_sched(sched);
      try {
        while (!stop_) {
          const auto gen = n->generation();
          const Nanos now = clock.now();
          if (now >= t_end) break;
          service(now);
          const Nanos next = std::min(due(), t_end);
          if (next <= clock.now()) continue;
          n->wait(gen, clock, next);
        }
      } catch (...) {
        {
          std::lock_guard lk(fault_mu);
          if (!fault) fault = std::current_exception();
        }
        request_stop();
      }
    };
  };

  const auto never = [] { return kNever; };
  std::vector<std::thread> threads;
  threads.emplace_back(loop(
      flight_.notifier(),
      [this](Nanos now) {
        flight_.service(now);
        for (auto& s : sources_) s->service(now);
      },
      [this] {
        Nanos due = flight_.next_due();
        for (const auto& s : sources_) due = std::min(due, s->next_due());
        return due;
      },
      Sched::Tick));
  threads.emplace_back(loop(net_.notifier(), [this](Nanos now) { net_.service(now); },
                            [this] { return net_.next_due(); }, Sched::Loop));
  threads.emplace_back(
      loop(mw_.north_notifier(), [this](Nanos now) { mw_.service_north(now); }, never, Sched::Tick));
  threads.emplace_back(
      loop(mw_.south_notifier(), [this](Nanos now) { mw_.service_south(now); }, never, Sched::Tick));
  threads.emplace_back(loop(
      mw_.release_notifier(), [this](Nanos now) { mw_.service_release(now); },
      [this] { return mw_.next_release_due(); }, Sched::Timer));
  threads.emplace_back(loop(gcs_.notifier(), [this](Nanos now) { gcs_.service(now); },
                            [this] { return gcs_.next_due(); }));

  while (!stop_ && clock.now() < t_end)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  request_stop();
  for (auto& t : threads) t.join();
  if (fault) {
    try {
      std::rethrow_exception(fault);
    } catch (const std::exception& e) {
      throw RunError(std::string("component fault: ") + e.what());
    }
  }
}

const StreamStats* RunReport::stream(const std::string& n) const {
  for (const auto& s : streams)
    if (s.name == n) return &s;
  return nullptr;
}

nlohmann::json RunReport::to_json() const {
  using nlohmann::json;
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["logical_time"] = logical_time;
  j["duration_s"] = duration_s;
  j["sim_time_s"] = sim_time_s;
  j["frozen_s"] = frozen_s;
  j["wall_time_s"] = wall_time_s;
  j["streams"] = json::array();
  for (const auto& s : streams) {
    j["streams"].push_back({{"name", s.name},
                            {"stream_id", s.stream_id},
                            {"kind", to_string(s.kind)},
                            {"iface", netsim::to_string(s.iface)},
                            {"sent", s.sent},
                            {"delivered", s.delivered},
                            {"dropped", s.dropped},
                            {"mean_delta_ns", s.mean_delta_ns},
                            {"p99_delta_ns", s.p99_delta_ns},
                            {"var_delta_ns2", s.var_delta_ns2},
                            {"mean_lateness_ns", s.mean_lateness_ns}});
  }
  j["frames"] = json::array();
  for (const auto& f : frames) {
    j["frames"].push_back({{"stream", f.stream},
                           {"uav_id", f.uav_id},
                           {"generated", f.metrics.generated},
                           {"delivered", f.metrics.delivered},
                           {"lost", f.metrics.lost},
                           {"delivery_ratio", f.metrics.delivery_ratio},
                           {"mean_interframe_ms", f.metrics.mean_interframe_ms},
                           {"var_interframe_ms", f.metrics.var_interframe_ms},
                           {"mean_latency_ms", f.metrics.mean_latency_ms}});
  }
  j["freeze_events"] = json::array();
  for (const auto& f : freeze_events) j["freeze_events"].push_back({{"t_start", f.t_start}, {"duration", f.duration}});
  j["in_flight"] = in_flight;
  j["audit_records"] = audit_records;
  j["integrity"] = {{"match", integrity_match}, {"mismatch", integrity_mismatch}};
  j["commands"] = {{"ack", commands_ack}, {"nack", commands_nack}, {"pending", commands_pending}};
  j["p99_lateness_ms"] = p99_lateness_ms;
  j["peak_rss_kb"] = peak_rss_kb;
  return j;
}

long peak_rss_kb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return ru.ru_maxrss;
}

Runner::Runner(ScenarioConfig cfg, RunOptions opts) : cfg_(std::move(cfg)), opts_(std::move(opts)) {
  validate(cfg_);
  logical_ = opts_.logical_time.value_or(cfg_.sim.logical_time);
  out_dir_ = opts_.out_dir.value_or(cfg_.out_dir);
  if (logical_)
    clock_ = std::make_unique<ManualClock>(0);
  else
    clock_ = std::make_unique<WallClock>();
  system_ = std::make_unique<System>(cfg_, *clock_);
}

Runner::~Runner() = default;

RunReport Runner::run() {
  const auto wall0 = std::chrono::steady_clock::now();
  const Nanos duration = s_to_ns(cfg_.sim.duration_s);
  if (logical_) {
    auto& clock = static_cast<ManualClock&>(*clock_);
    system_->start(0);
    system_->run_logical(clock, duration);
  } else {
    const auto& clock = static_cast<const WallClock&>(*clock_);
    const Nanos t0 = clock.now() + 5 * kNsPerMs;
    system_->start(t0);
    system_->run_realtime(clock, t0 + duration);
  }
  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  auto report = build_report(wall_s);
  if (opts_.write_traces) write_traces(report);
  return report;
}

RunReport Runner::build_report(double wall_s) const {
  auto& sys = *system_;
  RunReport r;
  r.name = cfg_.name;
  r.seed = cfg_.sim.seed;
  r.logical_time = logical_;
  r.duration_s = cfg_.sim.duration_s;
  r.sim_time_s = static_cast<double>(sys.flight().ticks()) * cfg_.sim.tick_ms / 1000.0;
  r.frozen_s = ns_to_s(sys.flight().frozen_total());
  r.wall_time_s = wall_s;

  const auto records = sys.bridge().records();
  for (std::size_t i = 0; i < cfg_.streams.size(); ++i) {
    const auto& sc = cfg_.streams[i];
    StreamStats s;
    s.name = sc.name;
    s.stream_id = static_cast<std::uint32_t>(i + 1);
    s.kind = sc.kind;
    s.iface = sc.iface;
    RunningStats delta;
    RunningStats late;
    std::vector<Nanos> deltas;
    for (const auto& rec : records) {
      if (rec.stream_id != s.stream_id) continue;
      ++s.sent;
      if (rec.dropped) {
        ++s.dropped[rec.reason];
        continue;
      }
      ++s.delivered;
      delta.add(static_cast<double>(rec.delta_ns));
      late.add(static_cast<double>(rec.lateness_ns));
      deltas.push_back(rec.delta_ns);
    }
    s.mean_delta_ns = delta.mean();
    s.var_delta_ns2 = delta.variance();
    s.p99_delta_ns = percentile(deltas, 0.99);
    s.mean_lateness_ns = late.mean();
    r.streams.push_back(std::move(s));
  }

  std::size_t src_idx = 0;
  for (const auto& sc : cfg_.streams) {
    if (sc.kind != StreamKind::Frames) continue;
    const auto& src = *sys.frame_sources()[src_idx++];
    const auto* sink = sys.gcs().frame_sink(sc.src, sc.name);
    r.frames.push_back({sc.name, sc.src, sink->metrics(src.frames_generated())});
  }

  r.freeze_events = sys.bridge().freeze_events();
  r.in_flight = sys.bridge().in_flight();
  r.audit_records = sys.bridge().audit().size();
  r.integrity_match = sys.bridge().integrity().matched();
  r.integrity_mismatch = sys.bridge().integrity().mismatched();
  for (const auto& c : sys.gcs().store().all_commands()) {
    switch (c.status) {
      case gcs::CmdStatus::Ack: ++r.commands_ack; break;
      case gcs::CmdStatus::Nack: ++r.commands_nack; break;
      case gcs::CmdStatus::Pending: ++r.commands_pending; break;
    }
  }
  r.p99_lateness_ms = ns_to_ms(static_cast<Nanos>(percentile(sys.net().lateness_samples(), 0.99)));
  r.peak_rss_kb = peak_rss_kb();
  return r;
}

void Runner::write_traces(const RunReport& report) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir_, ec);
  if (ec) throw RunError("cannot create output directory " + out_dir_ + ": " + ec.message());
  auto& sys = *system_;
  const auto path = [&](const char* name) { return (fs::path(out_dir_) / name).string(); };

  sys.bridge().write_delay_csv(path("delay_trace.csv"));
  sys.bridge().write_position_csv(path("position_trace.csv"));
  sys.net().write_rss_csv(path("rss_trace.csv"));

  {
    std::ofstream out(path("frame_trace.csv"));
    out << "stream,frame_seq,is_iframe,t_first_frag_ns,t_complete_ns,interframe_ms,lost\n";
    std::size_t src_idx = 0;
    for (const auto& sc : cfg_.streams) {
      if (sc.kind != StreamKind::Frames) continue;
      const auto& src = *sys.frame_sources()[src_idx++];
      sys.gcs().frame_sink(sc.src, sc.name)->write_csv(out, src.frames_generated(), false);
    }
  }
  {
    std::ofstream out(path("telemetry_trace.csv"));
    out << "t_gen_ns,uav_id,seq,sim_time_s,flight_time_s,lat,lon,alt_m,x_m,y_m,z_m,vx,vy,vz,battery_pct,mode,ack_cmd_id\n";
    for (const auto& s : sys.telemetry()) {
      const auto& t = s.tel;
      out << fmt::format("{},{},{},{:.3f},{:.3f},{:.9f},{:.9f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{},{}\n",
                         t.t_gen, t.uav_id, t.seq, s.sim_time_s, s.flight_time_s, t.pos.lat, t.pos.lon,
                         t.pos.alt, s.local.x, s.local.y, s.local.z, t.vel.vx, t.vel.vy, t.vel.vz,
                         t.battery_pct, flightsim::to_string(t.mode),
                         t.ack_cmd_id ? std::to_string(*t.ack_cmd_id) : "");
    }
  }
  {
    std::ofstream out(path("run_report.json"));
    out << report.to_json().dump(2) << "\n";
  }
}

RunReport run(const ScenarioConfig& cfg, RunOptions opts) {
  Runner r(cfg, std::move(opts));
  return r.run();
}

}  // namespace uavnet::scenario
