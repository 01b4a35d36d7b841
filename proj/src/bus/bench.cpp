#include "uavnet/bus/bench.hpp"

#include <atomic>
#include <cstring>
#include <ostream>
#include <thread>

#include "uavnet/core/rng.hpp"
#include "uavnet/core/stats.hpp"

namespace uavnet::bus {

EndpointMode parse_endpoint_mode(std::string_view s) {
  if (s == "single") return EndpointMode::SinglePair;
  if (s == "parallel") return EndpointMode::ParallelPairs;
  throw BusError("unknown endpoint mode '" + std::string(s) + "' (expected single|parallel)");
}

std::string to_string(EndpointMode m) {
  return m == EndpointMode::SinglePair ? "single" : "parallel";
}

void fill_bench_payload(std::span<std::byte> out, std::uint32_t stream_id, std::uint64_t seq) {
  std::uint64_t state = mix_seed((static_cast<std::uint64_t>(stream_id) << 40) ^ seq);
  std::size_t i = 0;
  while (i < out.size()) {
    state = mix_seed(state);
    const std::size_t n = std::min<std::size_t>(8, out.size() - i);
    std::memcpy(out.data() + i, &state, n);
    i += n;
  }
}

namespace {

std::string stream_topic(int i) { return "bench/" + std::to_string(i); }

// One receiving task per direction, polling every subscription of its poll
// set in order; with ParallelPairs the set holds one subscription per pair.
struct Receiver {
  std::vector<std::shared_ptr<Subscription>> subs;
  std::shared_ptr<Notifier> notifier = std::make_shared<Notifier>();
  std::vector<BenchSample> samples;
  std::uint64_t corrupted = 0;
  std::uint64_t out_of_order = 0;
  std::vector<std::int64_t> last_seq;
};

void receive(Receiver& r, const WallClock& clock, const std::atomic<bool>& stop,
             std::size_t payload_bytes) {
  std::vector<std::byte> expected(payload_bytes);
  std::uint64_t seen = 0;
  while (!stop.load(std::memory_order_acquire)) {
    seen = r.notifier->wait(seen, clock, clock.now() + 20 * kNsPerMs);
    for (auto& sub : r.subs) {
      // The receive stamp is taken once the payload has been checked, so a
      // drained batch is charged the consumer time of the messages ahead of it.
      for (Envelope& env : sub->try_poll()) {
        fill_bench_payload(expected, env.stream_id, env.seq);
        const auto got = env.bytes();
        if (got.size() != expected.size() ||
            std::memcmp(got.data(), expected.data(), got.size()) != 0) {
          ++r.corrupted;
        }
        if (env.stream_id >= r.last_seq.size()) r.last_seq.resize(env.stream_id + 1, -1);
        if (static_cast<std::int64_t>(env.seq) <= r.last_seq[env.stream_id]) ++r.out_of_order;
        r.last_seq[env.stream_id] = static_cast<std::int64_t>(env.seq);
        env.t_sub_recv = clock.now();
        r.samples.push_back(BenchSample{env.stream_id, env.seq, env.delay()});
      }
    }
  }
}

}  // namespace

BenchResult bench_bus(const BenchConfig& cfg) {
  if (cfg.n_streams < 1 || cfg.n_streams > kMaxBenchStreams) {
    throw BusError("n_streams must be in [1, " + std::to_string(kMaxBenchStreams) + "]");
  }
  if (cfg.mode == EndpointMode::ParallelPairs && cfg.n_streams > cfg.max_parallel_pairs) {
    throw CapacityError("parallel mode needs " + std::to_string(cfg.n_streams) +
                        " publisher/subscriber pairs; capacity is " +
                        std::to_string(cfg.max_parallel_pairs));
  }
  if (cfg.rate_hz <= 0.0 || cfg.duration_s <= 0.0) throw BusError("rate and duration must be > 0");

  WallClock clock;
  Bus bus(clock);
  std::atomic<bool> stop{false};

  std::vector<std::shared_ptr<Endpoint>> pubs;
  std::vector<std::shared_ptr<Endpoint>> sub_eps;
  Receiver receiver;
  const bool single = cfg.mode == EndpointMode::SinglePair;
  const int pairs = single ? 1 : cfg.n_streams;
  for (int i = 0; i < pairs; ++i) {
    pubs.push_back(bus.open_endpoint());
    sub_eps.push_back(bus.open_endpoint());
    auto sub = sub_eps.back()->subscribe(single ? "bench" : stream_topic(i));
    sub->set_notifier(receiver.notifier);
    receiver.subs.push_back(std::move(sub));
  }
  std::thread rx(receive, std::ref(receiver), std::cref(clock), std::cref(stop),
                 cfg.payload_bytes);

  // Pre-render payloads for one period so the publish path measures the bus,
  // not payload synthesis.
  const Nanos period = static_cast<Nanos>(1e9 / cfg.rate_hz);
  const auto ticks = static_cast<std::uint64_t>(cfg.duration_s * cfg.rate_hz);
  Nanos next = clock.now() + 5 * kNsPerMs;
  for (std::uint64_t k = 0; k < ticks; ++k) {
    std::vector<PayloadPtr> batch;
    batch.reserve(static_cast<std::size_t>(cfg.n_streams));
    for (int i = 0; i < cfg.n_streams; ++i) {
      auto p = std::make_shared<Payload>(cfg.payload_bytes);
      fill_bench_payload(*p, static_cast<std::uint32_t>(i), k);
      batch.push_back(std::move(p));
    }
    std::this_thread::sleep_until(clock.to_time_point(next));
    for (int i = 0; i < cfg.n_streams; ++i) {
      Endpoint& ep = *pubs[single ? 0 : static_cast<std::size_t>(i)];
      ep.publish(stream_topic(i), std::move(batch[static_cast<std::size_t>(i)]),
                 static_cast<std::uint32_t>(i));
    }
    next += period;
  }

  const Nanos drain_deadline = clock.now() + 500 * kNsPerMs;
  while (clock.now() < drain_deadline) {
    bool empty = true;
    for (auto& sub : receiver.subs) empty = empty && sub->pending() == 0;
    if (empty) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  stop.store(true, std::memory_order_release);
  receiver.notifier->notify();
  rx.join();

  BenchResult result;
  result.samples = std::move(receiver.samples);
  std::uint64_t dropped = 0;
  for (auto& sub : receiver.subs) dropped += sub->dropped();
  std::uint64_t corrupted = receiver.corrupted;
  std::uint64_t ooo = receiver.out_of_order;
  result.summary = summarize(result.samples);
  result.summary.dropped = dropped;
  result.summary.corrupted = corrupted;
  result.summary.out_of_order = ooo;
  return result;
}

BusDelaySummary summarize(const std::vector<BenchSample>& samples) {
  BusDelaySummary s;
  s.samples = samples.size();
  if (samples.empty()) return s;
  std::vector<Nanos> ze2e;
  ze2e.reserve(samples.size());
  double pub = 0, q = 0, sub = 0, tot = 0;
  for (const auto& x : samples) {
    pub += static_cast<double>(x.delay.d_pub);
    q += static_cast<double>(x.delay.d_q);
    sub += static_cast<double>(x.delay.d_sub);
    tot += static_cast<double>(x.delay.d_ze2e);
    ze2e.push_back(x.delay.d_ze2e);
  }
  const auto n = static_cast<double>(samples.size());
  s.mean_pub_ns = pub / n;
  s.mean_q_ns = q / n;
  s.mean_sub_ns = sub / n;
  s.mean_ze2e_ns = tot / n;
  s.p99_ze2e_ns = percentile(ze2e, 0.99);
  return s;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchSample>& samples) {
  os << "stream_id,seq,d_pub_ns,d_q_ns,d_sub_ns,d_ze2e_ns\n";
  for (const auto& s : samples) {
    os << s.stream_id << ',' << s.seq << ',' << s.delay.d_pub << ',' << s.delay.d_q << ','
       << s.delay.d_sub << ',' << s.delay.d_ze2e << '\n';
  }
}

}  // namespace uavnet::bus
