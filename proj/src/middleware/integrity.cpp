#include "uavnet/middleware/integrity.hpp"

#include "uavnet/core/hash.hpp"

namespace uavnet::middleware {

void IntegrityLedger::record(std::uint32_t stream_id, std::uint64_t seq,
                             std::span<const std::byte> bytes) {
  const auto h = fnv1a64(bytes);
  std::lock_guard lk(mu_);
  hashes_[{stream_id, seq}] = h;
}

IntegrityLedger::Verdict IntegrityLedger::verify(std::uint32_t stream_id, std::uint64_t seq,
                                                 std::span<const std::byte> bytes) {
  const auto h = fnv1a64(bytes);
  std::lock_guard lk(mu_);
  auto it = hashes_.find({stream_id, seq});
  if (it == hashes_.end()) {
    ++unknown_;
    return Verdict::Unknown;
  }
  if (it->second != h) {
    ++mismatched_;
    return Verdict::Mismatch;
  }
  ++matched_;
  return Verdict::Match;
}

std::uint64_t IntegrityLedger::matched() const {
  std::lock_guard lk(mu_);
  return matched_;
}

std::uint64_t IntegrityLedger::mismatched() const {
  std::lock_guard lk(mu_);
  return mismatched_;
}

std::uint64_t IntegrityLedger::unknown() const {
  std::lock_guard lk(mu_);
  return unknown_;
}

std::size_t IntegrityLedger::size() const {
  std::lock_guard lk(mu_);
  return hashes_.size();
}

}  // namespace uavnet::middleware
