#pragma once

#include <cstdint>
#include <random>

namespace fbsense {

// SplitMix64 finaliser; a bijective 64-bit mix.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based child seed: depends only on (parent, counter), never on the
/// order in which children are requested.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
  return splitmix64(splitmix64(parent) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

// Independent sub-streams of one noise realization.
enum class Stream : std::uint64_t {
  thermal = 1,
  backaction = 2,
  measurement = 3,
  signal = 4,
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream) {
  return Engine(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace fbsense
