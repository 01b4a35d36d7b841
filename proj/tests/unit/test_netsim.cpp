#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "uavnet/core/stats.hpp"
#include "uavnet/netsim/netsim.hpp"
#include "uavnet/netsim/routing.hpp"
#include "support/oracles.hpp"

using namespace uavnet;
using namespace uavnet::netsim;
using oracle::bianchi_total_throughput;
using oracle::naive_dcf_throughput;
using oracle::rss;

namespace {

NetConfig base_config() {
  NetConfig c;
  return c;
}

void add_infra(NetSim& ns) {
  ns.add_node(kGcsNodeId, NodeRole::Gcs, {0, 0, 0}, {});
  ns.add_node(kApNodeId, NodeRole::Ap, {0, 0, 0}, {IfaceKind::Wifi});
  ns.add_node(kEnbNodeId, NodeRole::EnodeB, {0, 0, 30}, {IfaceKind::Lte});
}

Packet control_packet(int uav, Nanos t0, std::size_t bytes = 1000) {
  Packet p;
  p.stream_id = 1;
  p.size_bytes = bytes;
  p.src_node = kGcsNodeId;
  p.dst_node = uav;
  p.iface = IfaceKind::Wifi;
  p.t0 = t0;
  return p;
}

}  // namespace

TEST_CASE("rss: path loss examples") {
  ChannelParams ch;
  CHECK(rss_dbm(16.0, 1.0, ch) == doctest::Approx(-24.05).epsilon(1e-12));
  CHECK(rss_dbm(16.0, 100.0, ch) == doctest::Approx(-84.05).epsilon(1e-12));
  CHECK(rss_dbm(16.0, 0.2, ch) == rss_dbm(16.0, 1.0, ch));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(1.0, 2000.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng);
    CHECK(rss_dbm(16.0, x, ch) - rss_dbm(16.0, 2 * x, ch) == doctest::Approx(30.0 * std::log10(2.0)));
    CHECK(rss_dbm(16.0, x, ch) == doctest::Approx(rss(16.0, x)).epsilon(1e-12));
  }
  CHECK(range_m(16.0, -92.0, ch) == doctest::Approx(std::pow(10.0, (16.0 + 92.0 - 40.05) / 30.0)));
  CHECK(range_m(16.0, -92.0, ch) == doctest::Approx(184.08).epsilon(1e-4));
  CHECK(range_m(10.5, -92.0, ch) == doctest::Approx(120.7).epsilon(1e-3));
}

TEST_CASE("rss: fading gain has unit mean") {
  for (double m : {0.5, 1.0, 3.0}) {
    Rng rng(11);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += fading_gain(m, rng);
    const double mean = sum / 1e5;
    CHECK(mean >= 0.97);
    CHECK(mean <= 1.03);
  }
  ChannelParams ch;
  ch.nakagami_m = 1.0;
  CHECK_THROWS_AS(rss_dbm(16.0, 10.0, ch), NetError);
  ch.nakagami_m = 0.3;
  CHECK_THROWS_AS(ch.validate(), NetError);
}

TEST_CASE("wifi: rate table and serialization") {
  WifiParams w;
  CHECK(w.rate_for(-50.0) == 54.0);
  CHECK(w.rate_for(-65.0) == 54.0);
  CHECK(w.rate_for(-70.0) == 36.0);
  CHECK(w.rate_for(-80.0) == 18.0);
  CHECK(w.rate_for(-92.0) == 6.0);
  CHECK_FALSE(w.rate_for(-92.5).has_value());
  CHECK(tx_time_ns(1000, 54.0) == 148148);
  CHECK(tx_time_ns(1000, *w.rate_for(-80.0)) == doctest::Approx(3 * 148148).epsilon(1e-5));
  CHECK(w.cw(0) == 15);
  CHECK(w.cw(1) == 31);
  CHECK(w.cw(6) == 1023);
  CHECK(w.cw(7) == 1023);
  WifiParams bad;
  bad.rate_table = {{-65.0, 54.0}, {-60.0, 36.0}};
  CHECK_THROWS_AS(bad.validate(), NetError);
}

TEST_CASE("dcf: zero-contention mean delay matches the analytic expectation") {
  WifiParams w;
  DcfEngine e(w, 5);
  const Nanos ttx = tx_time_ns(1000, 54.0);
  const double analytic = static_cast<double>(w.difs_ns) + w.cw_min / 2.0 * w.slot_ns +
                          static_cast<double>(ttx + w.sifs_ns + w.ack_ns);
  CHECK(analytic == doctest::Approx(309648.0).epsilon(1e-4));
  RunningStats st;
  for (int i = 0; i < 10000; ++i) {
    const Nanos t = static_cast<Nanos>(i) * 10 * kNsPerMs;
    const auto r = e.transmit(t, 1000, 54.0);
    REQUIRE(r.delivered);
    const Nanos d = r.t_done - t;
    REQUIRE(d >= w.difs_ns + ttx + w.sifs_ns + w.ack_ns);
    REQUIRE(d <= w.difs_ns + w.cw_min * w.slot_ns + ttx + w.sifs_ns + w.ack_ns);
    st.add(static_cast<double>(d));
  }
  CHECK(std::abs(st.mean() - analytic) / analytic < 0.05);
  CHECK(st.mean() < 1e6);
}

TEST_CASE("dcf: saturated stations match the slot-enumeration oracle") {
  const double seconds = 300.0;
  for (int n : {2, 3}) {
    DcfEngine e(WifiParams{}, 100 + n);
    for (int i = 0; i < n; ++i) e.add_station({});
    e.run_until(s_to_ns(seconds));
    const auto oracle = naive_dcf_throughput(n, seconds, 900 + n);
    for (int i = 0; i < n; ++i) {
      const double thr = e.station_stats(i).successes * 8000.0 / ns_to_s(e.now());
      CAPTURE(n);
      CAPTURE(i);
      CHECK(std::abs(thr - oracle[i]) / oracle[i] < 0.02);
    }
  }
}

TEST_CASE("dcf: saturation throughput near the Bianchi closed form") {
  for (int n : {5, 10}) {
    DcfEngine e(WifiParams{}, 200 + n);
    for (int i = 0; i < n; ++i) e.add_station({});
    e.run_until(s_to_ns(100.0));
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += e.station_stats(i).successes * 8000.0;
    total /= ns_to_s(e.now());
    const double ref = bianchi_total_throughput(n);
    CAPTURE(n);
    CHECK(std::abs(total - ref) / ref < 0.15);
  }
}

TEST_CASE("dcf: contention raises delay and busy fraction") {
  auto run = [](int contenders, double* busy) {
    DcfEngine e(WifiParams{}, 77);
    DcfEngine::StationSpec s;
    s.saturated = false;
    s.offered_mbps = 10.0;
    for (int i = 0; i < contenders; ++i) e.add_station(s);
    RunningStats st;
    for (int i = 0; i < 10000; ++i) {
      const Nanos t = static_cast<Nanos>(i) * 10 * kNsPerMs;
      const auto r = e.transmit(t, 1000, 54.0);
      if (r.delivered) st.add(static_cast<double>(r.t_done - t));
    }
    if (busy) *busy = e.busy_fraction();
    return st;
  };
  double b5 = 0, b10 = 0;
  const auto s0 = run(0, nullptr);
  const auto s1 = run(1, nullptr);
  const auto s5 = run(5, &b5);
  const auto s10 = run(10, &b10);
  CHECK(s0.mean() <= s1.mean());
  CHECK(s1.mean() < s5.mean());
  CHECK(s5.mean() < s10.mean());
  CHECK(s10.variance() > s5.variance());
  CHECK(b10 > b5);
}

TEST_CASE("dcf: paced stations respect the queue cap") {
  WifiParams w;
  DcfEngine e(w, 1);
  DcfEngine::StationSpec s;
  s.saturated = false;
  s.offered_mbps = 50.0;
  s.rate_mbps = 6.0;
  const auto idx = e.add_station(s);
  e.run_until(s_to_ns(2.0));
  CHECK(e.station_stats(idx).queue_drops > 0);
  CHECK(e.busy_fraction() > 0.9);
}

TEST_CASE("lte: delay model") {
  LteParams p;
  CHECK(p.grant_period_ns(0) == kNsPerMs);
  CHECK(p.grant_period_ns(7) == 7 * kNsPerMs);
  CHECK(p.grant_period_ns(40) == 40 * kNsPerMs);
  CHECK(p.efficiency_for(30.0) == 4.5);
  CHECK(p.efficiency_for(-6.0) == 0.15);
  CHECK_FALSE(p.efficiency_for(-6.5).has_value());
  Rng rng(9);
  RunningStats st;
  for (int i = 0; i < 10000; ++i) {
    const auto r = lte_transfer(200, LteDirection::Ul, 1, -60.0, -94.0, p, rng);
    REQUIRE(r.delivered);
    REQUIRE(r.grant_wait_ns >= 0);
    REQUIRE(r.grant_wait_ns <= p.grant_period_ns(1));
    st.add(ns_to_ms(r.delta_ns));
  }
  const double expected = 0.5 + 200.0 * 8.0 / (4.5 * 20e6) * 1e3 + 10.0;
  CHECK(st.mean() == doctest::Approx(expected).epsilon(0.01));
  CHECK(st.mean() >= 10.0);
  CHECK(st.mean() <= 12.0);
  for (int i = 0; i < 1000; ++i) {
    const auto r = lte_transfer(200, LteDirection::Dl, 25, -60.0, -94.0, p, rng);
    REQUIRE(r.grant_wait_ns <= 25 * kNsPerMs);
  }
  CHECK_FALSE(lte_transfer(200, LteDirection::Ul, 1, -101.0, -94.0, p, rng).delivered);
  CHECK_THROWS_AS(lte_transfer(200, LteDirection::Ul, 41, -60.0, -94.0, p, rng), NetError);
}

TEST_CASE("routing: min hop with smallest-id tie break") {
  Adjacency line{{0, {1}}, {1, {0, 2}}, {2, {1, 3}}, {3, {2}}};
  CHECK(*min_hop_route(line, 0, 3) == std::vector<int>{0, 1, 2, 3});
  CHECK(*min_hop_route(line, 1, 2) == std::vector<int>{1, 2});
  Adjacency diamond{{0, {5, 2}}, {5, {0, 9}}, {2, {0, 9}}, {9, {5, 2}}};
  CHECK(*min_hop_route(diamond, 0, 9) == std::vector<int>{0, 2, 9});
  Adjacency split{{0, {1}}, {1, {0}}, {2, {}}};
  CHECK_FALSE(min_hop_route(split, 0, 2).has_value());

  // Random graphs: path length equals BFS distance computed independently.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Adjacency g;
    const int n = 12;
    for (int i = 0; i < n; ++i) g[i];
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng() % 5 == 0) {
          g[i].push_back(j);
          g[j].push_back(i);
        }
    std::vector<int> dist(n, -1);
    std::vector<int> q{0};
    dist[0] = 0;
    for (std::size_t h = 0; h < q.size(); ++h)
      for (int v : g[q[h]])
        if (dist[v] < 0) {
          dist[v] = dist[q[h]] + 1;
          q.push_back(v);
        }
    for (int dst = 1; dst < n; ++dst) {
      auto r = min_hop_route(g, 0, dst);
      REQUIRE(r.has_value() == (dist[dst] >= 0));
      if (r) {
        REQUIRE(static_cast<int>(r->size()) - 1 == dist[dst]);
        for (std::size_t k = 0; k + 1 < r->size(); ++k) {
          const auto& nb = g[(*r)[k]];
          REQUIRE(std::find(nb.begin(), nb.end(), (*r)[k + 1]) != nb.end());
        }
      }
    }
  }
}

TEST_CASE("netsim: d2d line relays hop by hop") {
  ManualClock clock;
  NetConfig cfg;
  cfg.wifi_tx_dbm = -3.0;  // AP reaches ~43 m
  cfg.d2d_tx_dbm = 0.0;    // UAV links reach ~54 m
  NetSim ns(clock, cfg, 1);
  add_infra(ns);
  for (int i = 0; i < 4; ++i)
    ns.add_node(i + 1, NodeRole::Uav, {50.0 * i, 0, 10}, {IfaceKind::Wifi, IfaceKind::D2d});
  CHECK(*ns.route(kGcsNodeId, 4, IfaceKind::D2d) ==
        std::vector<int>{kGcsNodeId, kApNodeId, 1, 2, 3, 4});
  CHECK(*ns.route(4, kGcsNodeId, IfaceKind::D2d) ==
        std::vector<int>{4, 3, 2, 1, kApNodeId, kGcsNodeId});
  CHECK(*ns.route(kGcsNodeId, 1, IfaceKind::D2d) == std::vector<int>{kGcsNodeId, kApNodeId, 1});

  auto p = control_packet(4, 0, 200);
  p.iface = IfaceKind::D2d;
  const auto out = ns.transfer(p);
  REQUIRE_FALSE(out.dropped);
  REQUIRE(out.hop_delays.size() == 5);
  CHECK(out.hop_delays[0] == 0);
  CHECK(out.delta_ns == std::accumulate(out.hop_delays.begin(), out.hop_delays.end(), Nanos{0}));
  CHECK(out.delta_ns >= out.serialization_ns);

  auto direct = control_packet(4, kNsPerSec, 200);
  const auto d = ns.transfer(direct);
  CHECK(d.dropped);
  CHECK(d.reason == "no-link");

  ns.set_position(3, {2000, 0, 10});
  auto cut = control_packet(4, 2 * kNsPerSec, 200);
  cut.iface = IfaceKind::D2d;
  const auto c = ns.transfer(cut);
  CHECK(c.dropped);
  CHECK(c.reason == "unreachable");
}

TEST_CASE("netsim: positions drive rss") {
  ManualClock clock;
  NetSim ns(clock, base_config(), 1);
  add_infra(ns);
  ns.add_node(1, NodeRole::Uav, {10, 0, 0}, {IfaceKind::Wifi});
  const double near = ns.link_rss(kApNodeId, 1, IfaceKind::Wifi);
  ns.set_position(1, {10, 0, 0});
  CHECK(ns.link_rss(kApNodeId, 1, IfaceKind::Wifi) == near);
  ns.set_position(1, {100, 0, 0});
  CHECK(near - ns.link_rss(kApNodeId, 1, IfaceKind::Wifi) == doctest::Approx(30.0));
  CHECK_THROWS_AS(ns.set_position(77, {0, 0, 0}), NetError);
  ns.transfer(control_packet(1, 0));
  REQUIRE(ns.rss_rows().size() == 1);
  CHECK(ns.rss_rows()[0].rss_dbm == doctest::Approx(rss(16.0, 100.0)).epsilon(1e-12));
  CHECK(ns.rss_rows()[0].x_m == 100.0);
}

TEST_CASE("netsim: interferers outside carrier sense do not matter") {
  auto run = [](bool far) {
    ManualClock clock;
    NetSim ns(clock, base_config(), 3);
    add_infra(ns);
    ns.add_node(1, NodeRole::Uav, {20, 0, 10}, {IfaceKind::Wifi});
    if (far) {
      InterfererConfig ic;
      ic.count = 5;
      ic.pos = {500, 0, 0};
      ns.inject_interferer(ic);
    }
    std::vector<Nanos> out;
    for (int i = 0; i < 500; ++i) out.push_back(ns.transfer(control_packet(1, i * kNsPerMs * 10)).delta_ns);
    return out;
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("netsim: moving interferer leaves sensing range") {
  ManualClock clock;
  NetSim ns(clock, base_config(), 3);
  add_infra(ns);
  ns.add_node(1, NodeRole::Uav, {20, 0, 10}, {IfaceKind::Wifi});
  InterfererConfig ic;
  ic.count = 3;
  ic.pos = {50, 0, 0};
  ic.velocity = {100, 0, 0};
  ns.inject_interferer(ic);
  ns.transfer(control_packet(1, 0));
  CHECK(ns.position(kFirstInterfererId).x == doctest::Approx(50.0));
  ns.transfer(control_packet(1, 2 * kNsPerSec));
  CHECK(ns.position(kFirstInterfererId).x == doctest::Approx(250.0).epsilon(0.01));
}

TEST_CASE("netsim: conservation and queue-full under overload") {
  ManualClock clock;
  NetSim ns(clock, base_config(), 8);
  add_infra(ns);
  ns.add_node(1, NodeRole::Uav, {20, 0, 10}, {IfaceKind::Wifi});
  InterfererConfig ic;
  ic.count = 10;
  ic.pos = {120, 0, 0};  // 6 Mbps tier
  ns.inject_interferer(ic);
  int delivered = 0, dropped = 0, queue_full = 0;
  std::vector<Delivery> seen;
  ns.set_delivery_handler([&](const Delivery& d) { seen.push_back(d); });
  for (int i = 0; i < 400; ++i) ns.submit(control_packet(1, i * kNsPerMs));
  ns.service(kNsPerSec);
  REQUIRE(seen.size() == 400);
  for (const auto& d : seen) {
    if (d.pkt.dropped) {
      ++dropped;
      CHECK_FALSE(d.pkt.reason.empty());
      if (d.pkt.reason == "queue-full") ++queue_full;
    } else {
      ++delivered;
      CHECK(d.pkt.delta_ns >= d.pkt.serialization_ns);
    }
  }
  CHECK(delivered + dropped == 400);
  CHECK(queue_full > 0);
  CHECK(delivered > 0);
}

TEST_CASE("scheduler: hardlimit drops late events, besteffort records them") {
  for (auto mode : {SyncMode::Hardlimit, SyncMode::Besteffort}) {
    ManualClock clock;
    NetConfig cfg;
    cfg.mode = mode;
    NetSim ns(clock, cfg, 1);
    add_infra(ns);
    ns.add_node(1, NodeRole::Uav, {10, 0, 0}, {IfaceKind::Wifi});
    std::vector<Delivery> seen;
    ns.set_delivery_handler([&](const Delivery& d) { seen.push_back(d); });
    ns.submit(control_packet(1, 0));
    ns.submit(control_packet(1, 15 * kNsPerMs));
    CHECK(ns.next_due() == 0);
    CHECK(ns.current_lag(20 * kNsPerMs) == 20 * kNsPerMs);
    ns.service(20 * kNsPerMs);
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].lateness_ns == 20 * kNsPerMs);
    CHECK(seen[1].lateness_ns == 5 * kNsPerMs);
    CHECK_FALSE(seen[1].pkt.dropped);
    if (mode == SyncMode::Hardlimit) {
      CHECK(seen[0].pkt.dropped);
      CHECK(seen[0].pkt.reason == "late");
    } else {
      CHECK_FALSE(seen[0].pkt.dropped);
    }
    CHECK(ns.current_lag(20 * kNsPerMs) == 0);
  }
}

TEST_CASE("scheduler: idle real-time loop keeps p99 lateness under 1 ms") {
  WallClock clock;
  NetSim ns(clock, base_config(), 1);
  add_infra(ns);
  ns.add_node(1, NodeRole::Uav, {10, 0, 0}, {IfaceKind::Wifi});
  std::atomic<bool> stop{false};
  std::thread loop([&] {
    auto n = ns.notifier();
    std::uint64_t seen = n->generation();
    while (!stop) {
      const Nanos due = std::min(ns.next_due(), clock.now() + 5 * kNsPerMs);
      seen = n->wait(seen, clock, due);
      ns.service(clock.now());
    }
  });
  for (int i = 0; i < 500; ++i) {
    ns.submit(control_packet(1, clock.now() + 2 * kNsPerMs));
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  stop = true;
  ns.notifier()->notify();
  loop.join();
  auto lat = ns.lateness_samples();
  REQUIRE(lat.size() == 500);
  std::vector<double> ms;
  for (auto l : lat) ms.push_back(ns_to_ms(l));
  CHECK(percentile(ms, 0.99) < 1.0);
}
