#include "uavnet/gcs/frames.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "uavnet/core/stats.hpp"
#include "uavnet/flightsim/topics.hpp"
#include "uavnet/gcs/store.hpp"

namespace uavnet::gcs {

namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

template <typename T>
void put(std::byte*& p, T v) {
  std::memcpy(p, &v, sizeof v);
  p += sizeof v;
}

template <typename T>
T get(const std::byte*& p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  p += sizeof v;
  return v;
}

Nanos frame_offset(double fps, std::uint32_t k) {
  return static_cast<Nanos>(std::llround(static_cast<double>(k) * 1e9 / fps));
}

}  // namespace

void FrameStreamConfig::validate() const {
  if (!(fps > 0.0)) throw GcsError("frames: fps must be > 0");
  if (gop < 1) throw GcsError("frames: gop must be >= 1");
  if (fragment_bytes < FragmentHeader::kSize)
    throw GcsError("frames: fragment_bytes must hold the fragment header");
  if (i_frame_bytes == 0 || p_frame_bytes == 0) throw GcsError("frames: frame sizes must be > 0");
  if (i_frame_bytes / fragment_bytes >= 65535 || p_frame_bytes / fragment_bytes >= 65535)
    throw GcsError("frames: too many fragments per frame");
}

std::size_t FrameStreamConfig::frame_bytes(std::uint32_t frame_seq) const {
  return is_iframe(frame_seq) ? i_frame_bytes : p_frame_bytes;
}

std::uint16_t FrameStreamConfig::fragment_count(std::uint32_t frame_seq) const {
  const auto n = frame_bytes(frame_seq);
  return static_cast<std::uint16_t>((n + fragment_bytes - 1) / fragment_bytes);
}

void FragmentHeader::write(std::byte* out) const {
  put(out, frame_seq);
  put(out, frag_idx);
  put(out, frag_count);
  put(out, static_cast<std::uint8_t>(is_iframe ? 1 : 0));
  put(out, t_gen);
}

FragmentHeader FragmentHeader::read(std::span<const std::byte> in) {
  if (in.size() < kSize) throw GcsError("fragment shorter than header");
  const std::byte* p = in.data();
  FragmentHeader h;
  h.frame_seq = get<std::uint32_t>(p);
  h.frag_idx = get<std::uint16_t>(p);
  h.frag_count = get<std::uint16_t>(p);
  h.is_iframe = get<std::uint8_t>(p) != 0;
  h.t_gen = get<Nanos>(p);
  if (h.frag_count == 0 || h.frag_idx >= h.frag_count) throw GcsError("fragment index out of range");
  return h;
}

FrameSource::FrameSource(bus::Bus& north, FrameStreamConfig cfg)
    : cfg_(std::move(cfg)),
      ep_(north.open_endpoint()),
      topic_(flightsim::frame_topic(cfg_.uav_id, cfg_.name)) {
  cfg_.validate();
}

void FrameSource::start(Nanos t_start) {
  t_start_ = t_start + s_to_ns(cfg_.start_s);
  started_ = true;
}

Nanos FrameSource::next_due() const {
  if (!started_) return kNever;
  const Nanos off = frame_offset(cfg_.fps, next_frame_);
  if (static_cast<double>(off) >= cfg_.stop_s * 1e9 - cfg_.start_s * 1e9) return kNever;
  return t_start_ + off;
}

bool FrameSource::service(Nanos now) {
  bool did = false;
  for (Nanos due = next_due(); due <= now; due = next_due()) {
    const std::uint32_t k = next_frame_++;
    FragmentHeader h;
    h.frame_seq = k;
    h.frag_count = cfg_.fragment_count(k);
    h.is_iframe = cfg_.is_iframe(k);
    h.t_gen = due;
    std::size_t remaining = cfg_.frame_bytes(k);
    for (std::uint16_t i = 0; i < h.frag_count; ++i) {
      const std::size_t size = std::max(std::min(remaining, cfg_.fragment_bytes), FragmentHeader::kSize);
      remaining -= std::min(remaining, cfg_.fragment_bytes);
      bus::Payload buf(size);
      h.frag_idx = i;
      h.write(buf.data());
      ep_->publish(topic_, std::make_shared<const bus::Payload>(std::move(buf)));
      bytes_ += size;
    }
    did = true;
  }
  return did;
}

bool FrameSink::on_fragment(std::span<const std::byte> payload, Nanos t_recv) {
  FragmentHeader h;
  try {
    h = FragmentHeader::read(payload);
  } catch (const GcsError&) {
    return false;
  }
  auto [it, fresh] = frames_.try_emplace(h.frame_seq);
  FrameRecord& f = it->second;
  if (fresh) {
    f.frame_seq = h.frame_seq;
    f.is_iframe = h.is_iframe;
    f.frag_count = h.frag_count;
    f.t_gen = h.t_gen;
    f.t_first = t_recv;
  } else if (f.frag_count != h.frag_count) {
    return false;
  }
  if (!f.got.insert(h.frag_idx).second) return false;
  if (f.got.size() == f.frag_count) f.t_complete = t_recv;
  return true;
}

std::vector<double> FrameSink::interframe_ms(std::uint64_t generated) const {
  std::vector<double> out;
  Nanos prev = -1;
  for (const auto& [seq, f] : frames_) {
    if (seq >= generated) break;
    if (f.t_complete < 0) continue;
    if (prev >= 0) out.push_back(ns_to_ms(f.t_complete - prev));
    prev = f.t_complete;
  }
  return out;
}

FrameMetrics FrameSink::metrics(std::uint64_t generated) const {
  FrameMetrics m;
  m.generated = generated;
  RunningStats latency;
  for (const auto& [seq, f] : frames_) {
    if (seq >= generated) break;
    if (f.t_complete < 0) continue;
    ++m.delivered;
    latency.add(ns_to_ms(f.t_complete - f.t_gen));
  }
  m.lost = generated - m.delivered;
  m.delivery_ratio = generated ? static_cast<double>(m.delivered) / static_cast<double>(generated) : 0.0;
  RunningStats gaps;
  for (double g : interframe_ms(generated)) gaps.add(g);
  m.mean_interframe_ms = gaps.mean();
  m.var_interframe_ms = gaps.variance();
  m.mean_latency_ms = latency.mean();
  return m;
}

void FrameSink::write_csv(std::ostream& out, std::uint64_t generated, bool header) const {
  if (header) out << "stream,frame_seq,is_iframe,t_first_frag_ns,t_complete_ns,interframe_ms,lost\n";
  Nanos prev = -1;
  for (std::uint64_t k = 0; k < generated; ++k) {
    auto it = frames_.find(static_cast<std::uint32_t>(k));
    const bool seen = it != frames_.end();
    const bool done = seen && it->second.t_complete >= 0;
    const bool iframe = seen ? it->second.is_iframe : false;
    std::string gap;
    if (done && prev >= 0) gap = fmt::format("{:.6f}", ns_to_ms(it->second.t_complete - prev));
    out << fmt::format("{},{},{},{},{},{},{}\n", stream_, k, iframe ? 1 : 0,
                       seen ? std::to_string(it->second.t_first) : "",
                       done ? std::to_string(it->second.t_complete) : "", gap, done ? 0 : 1);
    if (done) prev = it->second.t_complete;
  }
}

}  // namespace uavnet::gcs
