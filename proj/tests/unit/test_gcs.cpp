#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "uavnet/core/stats.hpp"
#include "uavnet/flightsim/codec.hpp"
#include "uavnet/flightsim/flightsim.hpp"
#include "uavnet/flightsim/topics.hpp"
#include "uavnet/gcs/gateway.hpp"
#include "uavnet/gcs/ground_station.hpp"

using namespace uavnet;
using namespace uavnet::gcs;
using flightsim::Command;
using flightsim::Mode;

namespace {

const geo::GeoPos kHome = geo::GeoPos::make(33.64, -117.84, 0.0);

flightsim::Telemetry tel(int uav, std::uint64_t seq) {
  flightsim::Telemetry t;
  t.uav_id = uav;
  t.seq = seq;
  t.pos = kHome;
  t.t_gen = static_cast<Nanos>(seq) * kNsPerMs;
  return t;
}

// Flight simulator and ground station sharing one bus, pumped in logical time.
struct Loop {
  Loop() : bus(clock), fs(clock, bus), gs(clock, bus) {}

  void add(int id) {
    fs.spawn_uav(id, kHome);
    gs.add_uav(id);
  }
  void start() {
    fs.start(0);
    gs.start(0);
    pump(0);
  }
  void pump(Nanos t) {
    clock.set(t);
    for (bool any = true; any;) {
      any = false;
      any |= fs.service(t);
      any |= gs.service(t);
    }
  }
  void run_to(Nanos t_end) {
    while (true) {
      const Nanos next = std::min(fs.next_due(), gs.next_due());
      if (next > t_end) break;
      pump(std::max(next, clock.now()));
    }
    pump(t_end);
  }

  ManualClock clock{0};
  bus::Bus bus;
  flightsim::FlightSim fs;
  GroundStation gs;
};

}  // namespace

TEST_CASE("telemetry store: ordered ring, duplicates ignored") {
  TelemetryStore s(4);
  CHECK(s.ingest(tel(1, 3)));
  CHECK(s.ingest(tel(1, 1)));
  CHECK_FALSE(s.ingest(tel(1, 3)));
  CHECK(s.ingest(tel(1, 2)));
  CHECK(s.latest(1)->seq == 3);
  for (std::uint64_t q = 4; q <= 6; ++q) s.ingest(tel(1, q));
  const auto h = s.history(1);
  REQUIRE(h.size() == 4);
  CHECK(h.front().seq == 3);
  CHECK(h.back().seq == 6);
  CHECK_FALSE(s.ingest(tel(1, 2)));  // older than the window
  CHECK_FALSE(s.latest(2).has_value());
  CHECK_THROWS_AS(TelemetryStore(0), GcsError);
}

TEST_CASE("property: store latest is the max seq and history stays sorted") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    TelemetryStore s(32);
    std::vector<std::uint64_t> seqs(100);
    for (std::size_t i = 0; i < seqs.size(); ++i) seqs[i] = i % 70;  // includes duplicates
    std::shuffle(seqs.begin(), seqs.end(), rng);
    std::uint64_t max_seen = 0;
    std::uint64_t prev_latest = 0;
    for (auto q : seqs) {
      s.ingest(tel(1, q));
      max_seen = std::max(max_seen, q);
      const auto latest = s.latest(1)->seq;
      CHECK(latest == max_seen);
      CHECK(latest >= prev_latest);
      prev_latest = latest;
      const auto h = s.history(1);
      CHECK(std::is_sorted(h.begin(), h.end(), [](auto& a, auto& b) { return a.seq < b.seq; }));
      CHECK(std::adjacent_find(h.begin(), h.end(), [](auto& a, auto& b) { return a.seq == b.seq; }) ==
            h.end());
      CHECK(h.back().seq == latest);
    }
  }
}

TEST_CASE("frame stream: cadence, GOP pattern and fragment arithmetic") {
  ManualClock clock{0};
  bus::Bus bus(clock);
  auto ep = bus.open_endpoint();
  auto sub = ep->subscribe("uav/1/frames/video");
  FrameStreamConfig cfg;
  cfg.uav_id = 1;
  FrameSource src(bus, cfg);
  src.start(0);
  src.service(s_to_ns(2.0) - 1);
  CHECK(src.frames_generated() == 60);
  const auto envs = sub->try_poll();
  std::map<std::uint32_t, int> frags;
  for (const auto& e : envs) {
    const auto h = FragmentHeader::read(e.bytes());
    ++frags[h.frame_seq];
    CHECK(h.is_iframe == (h.frame_seq % 12 == 0));
    CHECK(h.t_gen == std::llround(h.frame_seq * 1e9 / 30.0));
    CHECK(e.bytes().size() == 1000);
  }
  CHECK(frags[0] == 12);
  CHECK(frags[12] == 12);
  CHECK(frags[1] == 3);
  CHECK(envs.size() == 5 * 12 + 55 * 3);

  // 624 frames: count I and P frames by enumeration, then the byte total.
  std::uint64_t i_frames = 0;
  for (std::uint32_t k = 0; k < 624; ++k) i_frames += k % 12 == 0;
  CHECK(i_frames == 52);
  FrameSource src2(bus, [] {
    FrameStreamConfig c;
    c.name = "v2";
    return c;
  }());
  src2.start(0);
  src2.service(s_to_ns(623.5 / 30.0));
  CHECK(src2.frames_generated() == 624);
  CHECK(src2.bytes_generated() == 52 * 12000 + 572 * 3000);
}

TEST_CASE("frame sink: reassembly, loss accounting, inter-frame time") {
  FrameStreamConfig cfg;
  auto fragment = [&](std::uint32_t k, std::uint16_t i) {
    FragmentHeader h{k, i, cfg.fragment_count(k), cfg.is_iframe(k), 0};
    bus::Payload buf(1000);
    h.write(buf.data());
    return buf;
  };
  const std::uint32_t n = 90;
  const Nanos period = s_to_ns(1.0 / 30.0);

  SUBCASE("zero loss: 33.3 ms mean gap, full delivery") {
    FrameSink sink("video");
    for (std::uint32_t k = 0; k < n; ++k)
      for (std::uint16_t i = 0; i < cfg.fragment_count(k); ++i)
        CHECK(sink.on_fragment(fragment(k, i), k * period + 300 * kNsPerUs + i * kNsPerUs));
    const auto m = sink.metrics(n);
    CHECK(m.delivered == n);
    CHECK(m.delivery_ratio == 1.0);
    CHECK(m.mean_interframe_ms == doctest::Approx(1000.0 / 30.0).epsilon(0.05));
  }
  SUBCASE("one dropped fragment loses the whole frame") {
    FrameSink sink("video");
    for (std::uint32_t k = 0; k < n; ++k)
      for (std::uint16_t i = 0; i < cfg.fragment_count(k); ++i)
        if (!(k == 24 && i == 5)) sink.on_fragment(fragment(k, i), k * period);
    const auto m = sink.metrics(n);
    CHECK(m.delivered == n - 1);
    CHECK(m.lost == 1);
    CHECK(m.delivery_ratio == doctest::Approx(double(n - 1) / n));
    // The gap spanning the lost frame is measured between delivered neighbours.
    const auto gaps = sink.interframe_ms(n);
    CHECK(gaps.size() == n - 2);
    CHECK(*std::max_element(gaps.begin(), gaps.end()) == doctest::Approx(2 * ns_to_ms(period)));
    std::ostringstream csv;
    sink.write_csv(csv, n, true);
    CHECK(csv.str().rfind("stream,frame_seq,is_iframe,t_first_frag_ns,t_complete_ns,interframe_ms,lost\n", 0) == 0);
    CHECK(csv.str().find("\nvideo,24,1,") != std::string::npos);
  }
  SUBCASE("duplicates and garbage are ignored") {
    FrameSink sink("video");
    CHECK(sink.on_fragment(fragment(1, 0), 1));
    CHECK_FALSE(sink.on_fragment(fragment(1, 0), 2));
    bus::Payload junk(4);
    CHECK_FALSE(sink.on_fragment(junk, 3));
    CHECK(sink.on_fragment(fragment(1, 1), 4));
    CHECK(sink.on_fragment(fragment(1, 2), 5));
    const auto m = sink.metrics(3);
    CHECK(m.delivered == 1);
    CHECK(m.delivered + m.lost == m.generated);
  }
  SUBCASE("property: delivered + lost = generated under random loss") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution drop(0.02);
    FrameSink sink("video");
    std::uint64_t complete = 0;
    for (std::uint32_t k = 0; k < n; ++k) {
      bool all = true;
      for (std::uint16_t i = 0; i < cfg.fragment_count(k); ++i) {
        if (drop(rng)) {
          all = false;
          continue;
        }
        sink.on_fragment(fragment(k, i), k * period);
      }
      complete += all;
    }
    const auto m = sink.metrics(n);
    CHECK(m.delivered == complete);
    CHECK(m.delivered + m.lost == n);
  }
}

TEST_CASE("ground station: arm then takeoff are both acked") {
  Loop l;
  l.add(1);
  l.start();
  const auto a = l.gs.send_command(1, Command::arm());
  const auto b = l.gs.send_command(1, Command::takeoff(10));
  l.run_to(s_to_ns(1.0));
  const auto hist = l.gs.store().commands(1);
  REQUIRE(hist.size() == 2);
  CHECK(l.gs.store().command(a)->status == CmdStatus::Ack);
  CHECK(l.gs.store().command(b)->status == CmdStatus::Ack);
  CHECK(l.gs.store().latest(1)->mode == Mode::TakingOff);
  CHECK_THROWS_AS(l.gs.send_command(2, Command::arm()), GcsError);
}

TEST_CASE("ground station: takeoff while disarmed is nacked") {
  Loop l;
  l.add(1);
  l.start();
  std::vector<nlohmann::json> events;
  l.gs.set_event_sink([&](const nlohmann::json& e) { events.push_back(e); });
  const auto id = l.gs.send_command(1, Command::takeoff(10));
  l.run_to(s_to_ns(0.5));
  CHECK(l.gs.store().command(id)->status == CmdStatus::Nack);
  std::vector<std::string> statuses;
  for (const auto& e : events)
    if (e["type"] == "cmd_status") statuses.push_back(e["status"]);
  CHECK(statuses == std::vector<std::string>{"pending", "nack"});
}

TEST_CASE("ground station: mission runs to completion in order") {
  Loop l;
  l.add(1);
  l.gs.set_mission(1, {{Command::arm(), 0.0},
                       {Command::takeoff(10), 1.0},
                       {Command::move(20, 0, 0), 0.0},
                       {Command::land(), 0.0}});
  l.start();
  l.run_to(s_to_ns(40.0));
  CHECK(l.gs.mission_done(1));
  const auto hist = l.gs.store().commands(1);
  REQUIRE(hist.size() == 4);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i].t_issue >= hist[i - 1].t_status);
  for (const auto& c : hist) CHECK(c.status == CmdStatus::Ack);
  const auto& st = l.fs.vehicle(1).state();
  CHECK(st.mode == Mode::Disarmed);
  CHECK(st.local.x == doctest::Approx(20.0).epsilon(0.03));
}

TEST_CASE("ground station: heartbeats follow the control cadence") {
  Loop l;
  l.add(1);
  l.gs.set_control_cadence(1, {10.0, 200});
  auto probe = l.bus.open_endpoint()->subscribe("gcs/cmd/1");
  l.start();
  l.run_to(s_to_ns(1.0) - 1);
  const auto envs = probe->try_poll();
  REQUIRE(envs.size() == 10);
  for (const auto& e : envs) CHECK(e.bytes().size() == 200);
  CHECK(l.fs.heartbeats_received() == 10);
  CHECK(l.fs.commands_received() == 0);
}

TEST_CASE("gateway: command JSON decoding") {
  using nlohmann::json;
  CHECK(parse_command_json(json{{"kind", "arm"}}).kind == flightsim::CommandKind::Arm);
  const auto t = parse_command_json(json{{"kind", "takeoff"}, {"alt_m", 10}});
  CHECK(t.alt_m == 10.0);
  const auto g = parse_command_json(json{{"kind", "goto"}, {"lat", 33.6}, {"lon", -117.8}, {"alt_m", 12}});
  CHECK(g.target.lat == 33.6);
  const auto m = parse_command_json(json{{"kind", "move"}, {"dx", 1}, {"dy", 2}, {"dz", 3}});
  CHECK(m.dz == 3.0);
  CHECK(parse_command_json(json{{"kind", "set_speed"}, {"speed_mps", 3}}).speed_mps == 3.0);
  CHECK_THROWS_WITH_AS(parse_command_json(json{{"kind", "takeoff"}}), "cmd.alt_m must be a number", GcsError);
  CHECK_THROWS_AS(parse_command_json(json{{"kind", "flip"}}), GcsError);
  CHECK_THROWS_AS(parse_command_json(json::array()), GcsError);
}

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;

struct Client {
  explicit Client(std::uint16_t port) : ws(ioc) {
    net::ip::tcp::resolver r(ioc);
    net::connect(ws.next_layer(), r.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/");
  }
  void send(const std::string& s) { ws.write(net::buffer(s)); }
  nlohmann::json read() {
    beast::flat_buffer b;
    ws.read(b);
    return nlohmann::json::parse(beast::buffers_to_string(b.data()));
  }
  net::io_context ioc;
  websocket::stream<net::ip::tcp::socket> ws;
};

void wait_sessions(const Gateway& gw, std::size_t n) {
  for (int i = 0; i < 500 && gw.session_count() != n; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  REQUIRE(gw.session_count() == n);
}

}  // namespace

TEST_CASE("gateway: broadcast, per-session errors, commands and subscriptions") {
  WallClock clock;
  bus::Bus bus(clock);
  GroundStation gs(clock, bus);
  gs.add_uav(1);
  gs.start(0);
  Gateway gw(gs);
  gw.start();
  REQUIRE(gw.port() != 0);

  Client a(gw.port());
  Client b(gw.port());
  wait_sessions(gw, 2);

  // Both sessions receive identical telemetry broadcasts carrying t_gen.
  gw.broadcast(telemetry_event(tel(1, 5)));
  const auto ta = a.read();
  CHECK(ta == b.read());
  CHECK(ta["type"] == "telemetry");
  CHECK(ta["t_gen_ns"] == 5 * kNsPerMs);
  for (const char* k : {"uav_id", "lat", "lon", "alt_m", "vx", "vy", "vz", "battery_pct", "mode", "seq"})
    CHECK(ta.contains(k));

  // Malformed input: error to the sender only.
  a.send("{not json");
  CHECK(a.read()["type"] == "error");
  a.send(R"({"type":"command","uav_id":1})");
  CHECK(a.read()["type"] == "error");
  a.send(R"({"type":"command","uav_id":7,"cmd":{"kind":"arm"}})");
  CHECK(a.read()["message"] == "unknown uav 7");
  gw.broadcast(metric_event("marker", 1, 2.0));
  CHECK(a.read()["name"] == "marker");
  CHECK(b.read()["name"] == "marker");  // b saw none of a's errors

  // A command is recorded and its pending status broadcast; the ack follows
  // the acknowledging telemetry.
  a.send(R"({"type":"command","uav_id":1,"cmd":{"kind":"arm"}})");
  const auto pa = a.read();
  CHECK(pa["type"] == "cmd_status");
  CHECK(pa["status"] == "pending");
  CHECK(b.read() == pa);
  const auto cmd_id = pa["cmd_id"].get<std::uint64_t>();
  REQUIRE(gs.store().command(cmd_id).has_value());

  b.send(R"({"type":"subscribe","topics":["cmd_status"]})");
  std::this_thread::sleep_for(std::chrono::milliseconds(100));  // no subscribe ack in the protocol
  auto uav = bus.open_endpoint();
  auto ack = tel(1, 9);
  ack.ack_cmd_id = cmd_id;
  uav->publish("uav/1/telemetry", bus::make_payload(flightsim::encode_telemetry(ack)));
  gs.service(clock.now());
  CHECK(a.read()["type"] == "telemetry");
  const auto sa = a.read();
  CHECK(sa["status"] == "ack");
  CHECK(b.read() == sa);  // b filtered out the telemetry event
  CHECK(gs.store().command(cmd_id)->status == CmdStatus::Ack);
  CHECK(gw.commands_accepted() == 1);

  // A disconnecting session leaves the other one served.
  a.ws.close(websocket::close_code::normal);
  wait_sessions(gw, 1);
  gw.broadcast(cmd_status_event(1, 99, CmdStatus::Nack));
  CHECK(b.read()["cmd_id"] == 99);
  gw.stop();
}
