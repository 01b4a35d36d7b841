#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uavnet {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent per-component seeds
/// from the single scenario seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = mix_seed(seed);
  for (char c : stream) h = mix_seed(h ^ static_cast<unsigned char>(c));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
  return Rng(derive_seed(seed, stream));
}

}  // namespace uavnet
