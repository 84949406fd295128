#pragma once

#include <cstdint>
#include <random>

namespace commtraj {

/// splitmix64 finalizer; a cheap bijective mixer for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of an independent stream identified by (master, stream, sub).
/// Results depend only on these ids, never on which worker draws them.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t sub = 0) {
  return mix64(mix64(mix64(master) ^ stream) ^ (sub * 0xd6e8feb86659fd93ULL));
}

using Rng = std::mt19937_64;

}  // namespace commtraj
