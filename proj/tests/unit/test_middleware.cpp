#include <doctest.h>

#include <thread>

#include "uavnet/flightsim/codec.hpp"
#include "uavnet/flightsim/topics.hpp"
#include "uavnet/middleware/middleware.hpp"

using namespace uavnet;
using namespace uavnet::middleware;
using netsim::IfaceKind;

namespace {

const geo::GeoPos kOrigin = geo::GeoPos::make(33.64, -117.84, 0.0);

struct Rig {
  explicit Rig(netsim::SyncMode mode = netsim::SyncMode::Besteffort, Clock* c = nullptr)
      : clock(c ? *c : manual),
        north(clock),
        south(clock),
        net(clock, [&] {
          netsim::NetConfig nc;
          nc.mode = mode;
          return nc;
        }(), 5),
        mw(clock, north, south, net, [&] {
          MiddlewareConfig mc;
          mc.origin = kOrigin;
          mc.freeze.mode = mode;
          return mc;
        }()) {
    net.add_node(netsim::kGcsNodeId, netsim::NodeRole::Gcs, {}, {});
    net.add_node(netsim::kApNodeId, netsim::NodeRole::Ap, {}, {IfaceKind::Wifi});
    net.add_node(netsim::kEnbNodeId, netsim::NodeRole::EnodeB, {0, 0, 30}, {IfaceKind::Lte});
    net.add_node(1, netsim::NodeRole::Uav, {20, 0, 10}, {IfaceKind::Wifi, IfaceKind::Lte});
    mw.add_route({"gcs/cmd/1", "control", 1, Side::South, netsim::kGcsNodeId, 1, IfaceKind::Wifi});
    mw.add_route({"uav/1/telemetry", "telemetry", 2, Side::North, 1, netsim::kGcsNodeId,
                  IfaceKind::Lte});
    mw.start();
  }

  // Logical-time pump: run every component until quiescent at `t`.
  void pump(Nanos t) {
    manual.set(t);
    bool any = true;
    while (any) {
      any = false;
      any |= mw.service_north(t);
      any |= mw.service_south(t);
      any |= net.service(t);
      any |= mw.service_release(t);
    }
  }
  void run_to(Nanos t_end) {
    pump(manual.now());
    while (true) {
      const Nanos next = std::min(net.next_due(), mw.next_release_due());
      if (next > t_end) break;
      pump(std::max(next, manual.now()));
    }
    pump(t_end);
  }

  ManualClock manual{0};
  const Clock& clock;
  bus::Bus north;
  bus::Bus south;
  netsim::NetSim net;
  Middleware mw;
};

std::string telemetry_at(double north_m, std::uint64_t seq, Nanos t_gen, int uav_id = 1) {
  flightsim::Telemetry t;
  t.uav_id = uav_id;
  t.seq = seq;
  t.pos = geo::from_local(kOrigin, {0.0, north_m, 10.0});
  t.mode = flightsim::Mode::Hovering;
  t.battery_pct = 90;
  t.t_gen = t_gen;
  return flightsim::encode_telemetry(t);
}

}  // namespace

TEST_CASE("release rule examples") {
  const Nanos T = 1'000 * kNsPerMs;
  auto early = decide_release(T, 5 * kNsPerMs, T + 2 * kNsPerMs);
  CHECK(early.waited);
  CHECK(early.release_at - (T + 2 * kNsPerMs) == 3 * kNsPerMs);
  CHECK(early.release_at == T + 5 * kNsPerMs);
  CHECK(early.lateness_ns == 0);
  auto late = decide_release(T, 5 * kNsPerMs, T + 9 * kNsPerMs);
  CHECK_FALSE(late.waited);
  CHECK(late.release_at == T + 9 * kNsPerMs);
  CHECK(late.lateness_ns == 4 * kNsPerMs);
  auto zero = decide_release(T, 0, T);
  CHECK_FALSE(zero.waited);
  CHECK(zero.release_at == T);
}

TEST_CASE("control packet crosses the network and is released at t0 + delta") {
  Rig rig;
  auto gcs = rig.south.open_endpoint();
  auto uav = rig.north.open_endpoint();
  auto inbox = uav->subscribe(flightsim::command_topic(1));
  const std::string body = "{\"type\":\"heartbeat\",\"seq\":1,\"t_gen\":0}";
  rig.manual.set(5 * kNsPerMs);
  gcs->publish("gcs/cmd/1", bus::make_payload(body));
  gcs->publish("gcs/cmd/1", bus::make_payload(body + " "));
  rig.run_to(50 * kNsPerMs);
  auto got = inbox->try_poll();
  REQUIRE(got.size() == 2);
  CHECK(got[0].text() == body);
  CHECK(got[0].stream_id == 1u);
  CHECK(rig.mw.integrity().verify(1, got[0].origin_seq, got[0].bytes()) ==
        IntegrityLedger::Verdict::Match);
  CHECK(rig.mw.integrity().verify(1, got[1].origin_seq, got[0].bytes()) ==
        IntegrityLedger::Verdict::Mismatch);
  const auto recs = rig.mw.records();
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) {
    CHECK_FALSE(r.dropped);
    CHECK(r.t0 == 5 * kNsPerMs);
    CHECK(r.delta_ns > 0);
    CHECK(r.release_ns == r.t0 + r.delta_ns);
    CHECK(r.lateness_ns == 0);
    CHECK(r.hops == "10000>10001>1");
  }
  CHECK(recs[1].release_ns > recs[0].release_ns);
}

TEST_CASE("telemetry updates positions at ingress, long before delivery") {
  Rig rig;
  auto uav = rig.north.open_endpoint();
  auto gcs = rig.south.open_endpoint();
  auto sub = gcs->subscribe("uav/1");
  rig.manual.set(kNsPerSec);
  uav->publish(flightsim::telemetry_topic(1), bus::make_payload(telemetry_at(80.0, 1, kNsPerSec)));
  rig.pump(kNsPerSec);
  CHECK(rig.net.position(1).y == doctest::Approx(80.0).epsilon(1e-9));
  CHECK(sub->try_poll().empty());
  const auto pos = rig.mw.position_updates();
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].t_applied_ns - pos[0].t_gen_ns == 0);
  rig.run_to(kNsPerSec + 60 * kNsPerMs);
  auto got = sub->try_poll();
  REQUIRE(got.size() == 1);
  const auto rec = rig.mw.records().at(0);
  CHECK(rec.delta_ns >= 10 * kNsPerMs);
  CHECK(rec.release_ns - rec.t0 == rec.delta_ns);
  CHECK(rec.hops == "1>10002>10000");
}

TEST_CASE("telemetry bursts arrive in generation order") {
  Rig rig;
  auto uav = rig.north.open_endpoint();
  rig.manual.set(0);
  for (int i = 0; i < 100; ++i)
    uav->publish(flightsim::telemetry_topic(1),
                 bus::make_payload(telemetry_at(i, i + 1, static_cast<Nanos>(i))));
  rig.pump(0);
  const auto pos = rig.mw.position_updates();
  REQUIRE(pos.size() == 100);
  for (int i = 0; i < 100; ++i) CHECK(pos[i].t_gen_ns == i);
  CHECK(rig.net.position(1).y == doctest::Approx(99.0));
}

TEST_CASE("audited drops") {
  Rig rig;
  auto uav = rig.north.open_endpoint();
  auto gcs = rig.south.open_endpoint();
  uav->publish("uav/9/telemetry", bus::make_payload(telemetry_at(1.0, 1, 0, 9)));
  uav->publish("uav/1/frames/cam", bus::make_payload("x"));
  uav->publish("uav/1/telemetry", bus::make_payload("{garbage"));
  gcs->publish("gcs/cmd/1", bus::make_payload("no subscriber on the north side"));
  rig.run_to(100 * kNsPerMs);
  const auto audit = rig.mw.audit();
  auto count = [&](const std::string& prefix) {
    return std::count_if(audit.begin(), audit.end(),
                         [&](const AuditRecord& a) { return a.reason.rfind(prefix, 0) == 0; });
  };
  CHECK(count("malformed-telemetry") == 2);  // unknown node 9, garbage
  CHECK(count("unmapped") == 2);             // uav/9/telemetry, frames
  CHECK(count("no-subscriber") == 2);  // garbage telemetry still crosses
  const auto recs = rig.mw.records();
  // Conservation: every mapped ingress has exactly one record.
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) CHECK((r.dropped || r.release_ns > 0));
  CHECK_THROWS_AS(rig.mw.add_route({"gcs/cmd/1", "dup", 9, Side::South, 0, 1, IfaceKind::Wifi}),
                  MiddlewareError);
  CHECK_THROWS_AS(rig.mw.add_route({"gcs/cmd/2", "dup", 1, Side::South, 0, 2, IfaceKind::Wifi}),
                  MiddlewareError);
}

TEST_CASE("freeze controller hysteresis") {
  FreezePolicy p;
  p.mode = netsim::SyncMode::FreezeAssist;
  FreezeController c(p);
  int freezes = 0, resumes = 0;
  auto feed = [&](Nanos t, Nanos lag) {
    switch (c.observe(t, lag)) {
      case FreezeController::Action::Freeze: ++freezes; break;
      case FreezeController::Action::Resume: ++resumes; break;
      default: break;
    }
  };
  for (Nanos t = 0; t < 100; ++t) feed(t * kNsPerMs, (t % 7) * kNsPerMs);
  CHECK(freezes == 0);
  // 100 ms stall beginning at 100 ms: lag ramps, then drains.
  for (Nanos t = 100; t <= 200; ++t) feed(t * kNsPerMs, (t - 100) * kNsPerMs);
  for (Nanos t = 201; t < 205; ++t) feed(t * kNsPerMs, 20 * kNsPerMs);
  CHECK(freezes == 1);
  CHECK(resumes == 0);
  CHECK(c.frozen());
  feed(205 * kNsPerMs, 0);
  CHECK(resumes == 1);
  for (Nanos t = 206; t < 400; ++t) feed(t * kNsPerMs, 3 * kNsPerMs);
  CHECK(freezes == 1);

  FreezePolicy inert;
  FreezeController b(inert);
  CHECK(b.observe(0, 500 * kNsPerMs) == FreezeController::Action::None);
  FreezePolicy bad;
  bad.freeze_threshold_ns = 0;
  CHECK_THROWS_AS(FreezeController{bad}, MiddlewareError);
}

TEST_CASE("injected stall triggers exactly one freeze/resume cycle") {
  WallClock wall;
  Rig rig(netsim::SyncMode::FreezeAssist, &wall);
  auto ctl = rig.north.open_endpoint()->subscribe(flightsim::kFreezeTopic);
  std::atomic<bool> stop{false};
  auto loop = [&](auto service, auto due, std::shared_ptr<Notifier> n) {
    return std::thread([&, service, due, n] {
      auto seen = n->generation();
      while (!stop) {
        seen = n->wait(seen, wall, std::min(due(), wall.now() + 2 * kNsPerMs));
        service(wall.now());
      }
    });
  };
  auto t_net = loop([&](Nanos t) { rig.net.service(t); }, [&] { return rig.net.next_due(); },
                    rig.net.notifier());
  auto t_rel = loop([&](Nanos t) { rig.mw.service_release(t); },
                    [&] { return rig.mw.next_release_due(); }, rig.mw.release_notifier());
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  rig.net.inject_stall(wall.now(), 100 * kNsPerMs);
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  stop = true;
  rig.net.notifier()->notify();
  rig.mw.release_notifier()->notify();
  t_net.join();
  t_rel.join();
  const auto ev = rig.mw.freeze_events();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].duration > 0);
  CHECK(ev[0].duration < 100 * kNsPerMs);
  auto msgs = ctl->try_poll();
  REQUIRE(msgs.size() == 2);
  CHECK(flightsim::decode_freeze(msgs[0].text()).frozen);
  const auto resume = flightsim::decode_freeze(msgs[1].text());
  CHECK_FALSE(resume.frozen);
  CHECK(resume.pause_ns == ev[0].duration);
}
