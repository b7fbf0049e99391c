#pragma once

#include <cstdint>
#include <random>

namespace lqdemix {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines a base seed with a stream tag into an independent seed.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(mix64(base) ^ tag);
}

inline Rng make_rng(std::uint64_t seed) {
  return Rng(mix64(seed));
}

}  // namespace lqdemix
