#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <utility>

namespace uavnet::middleware {

/// Payload hashes keyed by (stream_id, origin seq), recorded at ingress and
/// checked by the consumer after delivery.
class IntegrityLedger {
 public:
  enum class Verdict { Match, Mismatch, Unknown };

  void record(std::uint32_t stream_id, std::uint64_t seq, std::span<const std::byte> bytes);
  Verdict verify(std::uint32_t stream_id, std::uint64_t seq, std::span<const std::byte> bytes);

  std::uint64_t matched() const;
  std::uint64_t mismatched() const;
  std::uint64_t unknown() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint64_t> hashes_;
  std::uint64_t matched_ = 0;
  std::uint64_t mismatched_ = 0;
  std::uint64_t unknown_ = 0;
};

}  // namespace uavnet::middleware
