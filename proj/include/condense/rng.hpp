#pragma once

#include <cstdint>
#include <limits>

namespace condense {

// Named substream purposes. Each (node, generation, purpose) triple gets its
// own independent stream so adding or removing one consumer of randomness
// never shifts the draws seen by another.
enum class Purpose : std::uint64_t {
  LocalCoefficients = 1,
  SourceData = 2,
  Dropout = 3,
  MessageLoss = 4,
  ChannelNoise = 5,
  WeightInit = 6,
  Dataset = 7,
  Shuffle = 8,
};

// SplitMix64 finaliser; used both for seed derivation and as the stream
// generator itself (statistically sound, trivially cheap to construct).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) noexcept : state_(mix64(seed)) {}

  // Substream keyed by (seed, node, generation, purpose).
  static RngStream derive(std::uint64_t seed, std::uint64_t node, std::uint64_t generation,
                          Purpose purpose) noexcept {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ node);
    h = mix64(h ^ generation);
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    return RngStream(h);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

 private:
  std::uint64_t state_;
};

}  // namespace condense
