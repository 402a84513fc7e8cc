#pragma once

#include <cstdint>
#include <random>

namespace vos {

using Rng = std::mt19937_64;

/// Fixed offsets for per-component random streams derived from one master seed.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kNoise = 3,
  kSample = 4,
  kSplit = 5,
  kFolds = 6,
  kSmote = 7,
  kAdasyn = 8,
  kClassifier = 9,
  kEval = 10,
};

/// SplitMix64 finalizer applied to master + offset.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t offset) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (offset + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, Stream stream) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(stream)));
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace vos
