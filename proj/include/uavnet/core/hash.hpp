#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace uavnet {

constexpr std::uint64_t fnv1a64(std::span<const std::byte> data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::byte b : data) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace uavnet
