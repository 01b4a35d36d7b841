#include "doctest.h"

#include <algorithm>
#include <map>
#include <sstream>
#include <random>
#include <thread>

#include "uavnet/bus/bench.hpp"
#include "uavnet/bus/bus.hpp"
#include "uavnet/core/hash.hpp"

using namespace uavnet;
using namespace uavnet::bus;

TEST_CASE("topic and prefix validation") {
  CHECK_NOTHROW(Topic::parse("uav/3/telemetry"));
  CHECK_THROWS_AS(Topic::parse(""), BusError);
  CHECK_THROWS_AS(Topic::parse("uav//telemetry"), BusError);
  CHECK_THROWS_AS(Topic::parse("/uav"), BusError);
  CHECK_THROWS_AS(Topic::parse("uav/"), BusError);

  CHECK(prefix_matches("uav/3", "uav/3/telemetry"));
  CHECK(prefix_matches("uav/3", "uav/3"));
  CHECK_FALSE(prefix_matches("uav/3", "uav/30/x"));
  CHECK(prefix_matches("", "anything/at/all"));
  CHECK_FALSE(prefix_matches("uav/3/telemetry/x", "uav/3/telemetry"));
}

TEST_CASE("publish delivers to a matching subscriber exactly once") {
  ManualClock clock;
  Bus bus(clock);
  auto pub = bus.open_endpoint();
  auto sub_ep = bus.open_endpoint();
  auto sub = sub_ep->subscribe("uav/1");
  const auto ack = pub->publish("uav/1/telemetry", make_payload("x"));
  CHECK(ack.delivered_to == 1);
  const auto got = sub->try_poll();
  REQUIRE(got.size() == 1);
  CHECK(got[0].topic.str() == "uav/1/telemetry");
  CHECK(got[0].text() == "x");
  CHECK(sub->try_poll().empty());
}

TEST_CASE("publish with no subscribers is acknowledged and discarded") {
  ManualClock clock;
  Bus bus(clock);
  auto pub = bus.open_endpoint();
  const auto ack = pub->publish("uav/1/telemetry", make_payload("x"));
  CHECK(ack.delivered_to == 0);
}

TEST_CASE("subscription prefixes are segment aligned") {
  ManualClock clock;
  Bus bus(clock);
  auto pub = bus.open_endpoint();
  auto ep = bus.open_endpoint();
  auto s3 = ep->subscribe("uav/3");
  auto all = ep->subscribe("");
  pub->publish("uav/3/telemetry", make_payload("a"));
  pub->publish("uav/30/telemetry", make_payload("b"));
  pub->publish("gcs/cmd/3", make_payload("c"));
  CHECK(s3->try_poll().size() == 1);
  CHECK(all->try_poll().size() == 3);
  CHECK_THROWS_AS(ep->subscribe("uav//3"), BusError);
}

TEST_CASE("no replay of messages published before subscribing") {
  ManualClock clock;
  Bus bus(clock);
  auto pub = bus.open_endpoint();
  pub->publish("a/b", make_payload("early"));
  auto sub = bus.open_endpoint()->subscribe("a");
  CHECK(sub->try_poll().empty());
}

TEST_CASE("poll returns FIFO order and the delay decomposition") {
  ManualClock clock(1'000);
  Bus bus(clock);
  auto pub = bus.open_endpoint();
  auto sub = bus.open_endpoint()->subscribe("t");
  for (int i = 0; i < 3; ++i) pub->publish("t/x", make_payload(std::to_string(i)));
  clock.advance(5 * kNsPerMs);
  const auto got = sub->poll(clock.now() + kNsPerMs);
  REQUIRE(got.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(got[i].seq == i);
    const auto d = got[i].delay();
    CHECK(d.d_q == 5 * kNsPerMs);
    CHECK(d.d_ze2e == d.d_pub + d.d_q + d.d_sub);
  }
}

TEST_CASE("empty poll on wall time returns within the deadline") {
  WallClock clock;
  Bus bus(clock);
  auto sub = bus.open_endpoint()->subscribe("t");
  const Nanos start = clock.now();
  const auto got = sub->poll(start + kNsPerMs);
  const Nanos waited = clock.now() - start;
  CHECK(got.empty());
  CHECK(waited >= kNsPerMs);
  CHECK(waited < 20 * kNsPerMs);
}

TEST_CASE("closed endpoints and cancelled subscriptions raise errors") {
  ManualClock clock;
  Bus bus(clock);
  auto ep = bus.open_endpoint();
  auto sub = ep->subscribe("a");
  ep->close();
  CHECK_THROWS_AS(ep->publish("a/b", make_payload("x")), EndpointClosed);
  CHECK_THROWS_AS(ep->subscribe("a"), EndpointClosed);
  CHECK_THROWS_AS(sub->try_poll(), SubscriptionCancelled);

  auto ep2 = bus.open_endpoint();
  auto sub2 = ep2->subscribe("a");
  sub2->cancel();
  CHECK_THROWS_AS(sub2->poll(0), SubscriptionCancelled);
  CHECK(bus.open_endpoint()->publish("a/b", make_payload("x")).delivered_to == 0);
}

TEST_CASE("queue overflow drops the oldest envelope") {
  ManualClock clock;
  Bus bus(clock, BusOptions{4});
  auto pub = bus.open_endpoint();
  auto sub = bus.open_endpoint()->subscribe("q");
  for (int i = 0; i < 10; ++i) pub->publish("q/x", make_payload(std::to_string(i)));
  const auto got = sub->try_poll();
  REQUIRE(got.size() == 4);
  CHECK(got.front().seq == 6);
  CHECK(got.back().seq == 9);
  CHECK(sub->dropped() == 6);
}

// Every interleaving of two publishers' sequences must reach a root
// subscriber with each publisher's messages in seq order.
TEST_CASE("two publishers: per-publisher order preserved over all interleavings") {
  constexpr int kPer = 3;
  std::vector<int> order(2 * kPer);
  std::fill(order.begin() + kPer, order.end(), 1);
  int interleavings = 0;
  do {
    ManualClock clock;
    Bus bus(clock);
    auto a = bus.open_endpoint();
    auto b = bus.open_endpoint();
    auto sub = bus.open_endpoint()->subscribe("");
    for (int who : order) (who == 0 ? a : b)->publish(who == 0 ? "s/a" : "s/b", make_payload("p"));
    const auto got = sub->try_poll();
    REQUIRE(got.size() == 2 * kPer);
    std::int64_t last_a = -1;
    std::int64_t last_b = -1;
    for (const auto& e : got) {
      auto& last = e.src_id == a->id() ? last_a : last_b;
      REQUIRE(static_cast<std::int64_t>(e.seq) == last + 1);
      last = static_cast<std::int64_t>(e.seq);
    }
    ++interleavings;
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(interleavings == 20);
}

TEST_CASE("concurrent publishers keep per-topic seq strictly increasing") {
  WallClock clock;
  Bus bus(clock);
  auto sub = bus.open_endpoint()->subscribe("");
  auto worker = [&](const char* topic) {
    auto ep = bus.open_endpoint();
    for (int i = 0; i < 2000; ++i) ep->publish(topic, make_payload("x"));
  };
  std::thread t1(worker, "s/a");
  std::thread t2(worker, "s/b");
  t1.join();
  t2.join();
  const auto got = sub->try_poll();
  CHECK(got.size() == 4000);
  std::map<std::string, std::int64_t> last;
  for (const auto& e : got) {
    auto [it, fresh] = last.try_emplace(e.topic.str(), -1);
    REQUIRE(static_cast<std::int64_t>(e.seq) > it->second);
    it->second = static_cast<std::int64_t>(e.seq);
  }
}

TEST_CASE("publish does not block on a stalled subscriber") {
  WallClock clock;
  Bus bus(clock, BusOptions{100});
  auto pub = bus.open_endpoint();
  auto stalled = bus.open_endpoint()->subscribe("s");  // never polled
  // A blocking publish would be slow on every overflowing call; one slow
  // call is host preemption, so a round is retried up to twice.
  Nanos best_worst = INT64_MAX;
  for (int round = 0; round < 3 && best_worst >= kNsPerMs; ++round) {
    Nanos worst = 0;
    for (int i = 0; i < 5000; ++i) {
      const Nanos t = clock.now();
      pub->publish("s/x", make_payload("payload"));
      worst = std::max(worst, clock.now() - t);
    }
    best_worst = std::min(best_worst, worst);
  }
  CHECK(best_worst < kNsPerMs);
  CHECK(stalled->dropped() % 5000 == 4900);
  CHECK(stalled->pending() == 100);
}

TEST_CASE("payloads arrive byte-for-byte over 10^4 random messages") {
  ManualClock clock;
  Bus bus(clock, BusOptions{20'000});
  auto pub = bus.open_endpoint();
  auto sub = bus.open_endpoint()->subscribe("");
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(0, 2048);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> stream(0, 7);
  std::vector<std::uint64_t> sent;
  for (int i = 0; i < 10'000; ++i) {
    Payload p(static_cast<std::size_t>(len(rng)));
    for (auto& b : p) b = static_cast<std::byte>(byte(rng));
    sent.push_back(fnv1a64(p));
    const int s = stream(rng);
    pub->publish("s/" + std::to_string(s), std::make_shared<const Payload>(std::move(p)),
                 static_cast<std::uint32_t>(s));
  }
  const auto got = sub->try_poll();
  REQUIRE(got.size() == sent.size());
  for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(fnv1a64(got[i].bytes()) == sent[i]);
}

TEST_CASE("bench: Eq-1 identity on every sample and argument checks") {
  BenchConfig cfg;
  cfg.n_streams = 1;
  cfg.payload_bytes = 16;
  cfg.duration_s = 0.3;
  const auto r = bench_bus(cfg);
  CHECK(r.samples.size() == 30);
  for (const auto& s : r.samples) {
    REQUIRE(s.delay.d_ze2e == s.delay.d_pub + s.delay.d_q + s.delay.d_sub);
    REQUIRE(s.delay.d_pub >= 0);
    REQUIRE(s.delay.d_q >= 0);
    REQUIRE(s.delay.d_sub >= 0);
  }
  CHECK(r.summary.corrupted == 0);
  CHECK(r.summary.out_of_order == 0);

  cfg.n_streams = 0;
  CHECK_THROWS_AS(bench_bus(cfg), BusError);
  cfg.n_streams = 201;
  CHECK_THROWS_AS(bench_bus(cfg), BusError);
  cfg.n_streams = 81;
  cfg.mode = EndpointMode::ParallelPairs;
  CHECK_THROWS_AS(bench_bus(cfg), CapacityError);
  cfg.max_parallel_pairs = 100;
  cfg.duration_s = 0.05;
  CHECK_NOTHROW(bench_bus(cfg));
}

TEST_CASE("bench csv layout") {
  std::ostringstream os;
  write_bench_csv(os, {BenchSample{2, 7, BusDelaySample{1, 2, 3, 6}}});
  CHECK(os.str() == "stream_id,seq,d_pub_ns,d_q_ns,d_sub_ns,d_ze2e_ns\n2,7,1,2,3,6\n");
}
