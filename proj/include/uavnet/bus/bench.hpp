#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uavnet/bus/bus.hpp"

namespace uavnet::bus {

/// SinglePair multiplexes every stream onto one publisher/subscriber pair;
/// ParallelPairs gives each stream its own pair.
enum class EndpointMode { SinglePair, ParallelPairs };

EndpointMode parse_endpoint_mode(std::string_view s);
std::string to_string(EndpointMode m);

inline constexpr int kMaxBenchStreams = 200;
inline constexpr int kDefaultMaxParallelPairs = 80;

struct BenchConfig {
  int n_streams = 1;
  std::size_t payload_bytes = 16;
  EndpointMode mode = EndpointMode::SinglePair;
  double duration_s = 1.0;
  double rate_hz = 100.0;  // per stream
  int max_parallel_pairs = kDefaultMaxParallelPairs;
};

struct BenchSample {
  std::uint32_t stream_id = 0;
  std::uint64_t seq = 0;
  BusDelaySample delay;
};

struct BusDelaySummary {
  std::size_t samples = 0;
  double mean_ze2e_ns = 0.0;
  double p99_ze2e_ns = 0.0;
  double mean_pub_ns = 0.0;
  double mean_q_ns = 0.0;
  double mean_sub_ns = 0.0;
  std::uint64_t dropped = 0;
  std::uint64_t corrupted = 0;    // payload mismatches
  std::uint64_t out_of_order = 0; // per-stream seq regressions
};

struct BenchResult {
  BusDelaySummary summary;
  std::vector<BenchSample> samples;
};

/// Drives n_streams phase-aligned streams at rate_hz each for duration_s of
/// wall time and records the delay decomposition of every delivery.
/// Throws BusError on an out-of-range stream count and CapacityError when
/// ParallelPairs would exceed max_parallel_pairs.
BenchResult bench_bus(const BenchConfig& cfg);

BusDelaySummary summarize(const std::vector<BenchSample>& samples);

/// CSV with header stream_id,seq,d_pub_ns,d_q_ns,d_sub_ns,d_ze2e_ns.
void write_bench_csv(std::ostream& os, const std::vector<BenchSample>& samples);

/// Deterministic payload content for (stream, seq); used to verify delivery.
void fill_bench_payload(std::span<std::byte> out, std::uint32_t stream_id, std::uint64_t seq);

}  // namespace uavnet::bus
