#pragma once

#include <cstdint>
#include <random>

namespace fundrank {

using Rng = std::mt19937_64;

// SplitMix64 finalizer over (seed, stream): independent, reproducible
// sub-seeds, so trial k or a given stage can be replayed in isolation.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream tags for the stages that draw randomness from one scene seed.
enum class SeedStream : std::uint64_t { kGeometry = 1, kCorruption = 2, kObservation = 3 };

inline Rng MakeRng(std::uint64_t seed, SeedStream stream) {
  return Rng(DeriveSeed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace fundrank
