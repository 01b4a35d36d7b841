#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uavnet/bus/bus.hpp"

namespace uavnet::gcs {

/// Synthetic I/P video stream cut into fixed-size fragments.
struct FrameStreamConfig {
  std::string name = "video";
  int uav_id = 0;
  double fps = 30.0;
  int gop = 12;
  std::size_t i_frame_bytes = 12000;
  std::size_t p_frame_bytes = 3000;
  std::size_t fragment_bytes = 1000;
  double start_s = 0.0;
  double stop_s = 1e18;

  void validate() const;
  bool is_iframe(std::uint32_t frame_seq) const { return frame_seq % static_cast<std::uint32_t>(gop) == 0; }
  std::size_t frame_bytes(std::uint32_t frame_seq) const;
  std::uint16_t fragment_count(std::uint32_t frame_seq) const;
};

/// Binary header at the front of every fragment (little-endian).
struct FragmentHeader {
  std::uint32_t frame_seq = 0;
  std::uint16_t frag_idx = 0;
  std::uint16_t frag_count = 0;
  bool is_iframe = false;
  Nanos t_gen = 0;

  static constexpr std::size_t kSize = 17;
  void write(std::byte* out) const;
  static FragmentHeader read(std::span<const std::byte> in);  // throws GcsError
};

/// Publishes every fragment of frame k at start + k / fps.
class FrameSource {
 public:
  FrameSource(bus::Bus& north, FrameStreamConfig cfg);
  void start(Nanos t_start);
  bool service(Nanos now);
  Nanos next_due() const;
  std::uint32_t frames_generated() const { return next_frame_; }
  std::uint64_t bytes_generated() const { return bytes_; }
  const FrameStreamConfig& config() const { return cfg_; }
  const std::string& topic() const { return topic_; }

 private:
  FrameStreamConfig cfg_;
  std::shared_ptr<bus::Endpoint> ep_;
  std::string topic_;
  Nanos t_start_ = 0;
  bool started_ = false;
  std::uint32_t next_frame_ = 0;
  std::uint64_t bytes_ = 0;
};

struct FrameRecord {
  std::uint32_t frame_seq = 0;
  bool is_iframe = false;
  std::uint16_t frag_count = 0;
  std::set<std::uint16_t> got;
  Nanos t_gen = 0;
  Nanos t_first = 0;
  Nanos t_complete = -1;
};

struct FrameMetrics {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  double delivery_ratio = 0.0;
  double mean_interframe_ms = 0.0;
  double var_interframe_ms = 0.0;
  double mean_latency_ms = 0.0;
};

/// Reassembles fragments; a frame counts only when every fragment arrived.
class FrameSink {
 public:
  explicit FrameSink(std::string stream) : stream_(std::move(stream)) {}
  /// Returns false for duplicates and malformed fragments.
  bool on_fragment(std::span<const std::byte> payload, Nanos t_recv);
  /// Metrics over frames 0..generated-1; frames never seen count as lost.
  FrameMetrics metrics(std::uint64_t generated) const;
  /// Inter-frame gaps (ms) between consecutive delivered frames in seq order.
  std::vector<double> interframe_ms(std::uint64_t generated) const;
  void write_csv(std::ostream& out, std::uint64_t generated, bool header) const;
  const std::string& stream() const { return stream_; }

 private:
  std::string stream_;
  std::map<std::uint32_t, FrameRecord> frames_;
};

}  // namespace uavnet::gcs
