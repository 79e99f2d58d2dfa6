#pragma once

#include <cstdint>

namespace gnnhls {

// SplitMix64. Pinned so that samples, synthetic graphs and seeded
// parameters are reproducible across implementations.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Value in [0, bound). Plain modulo reduction; the bias is below 2^-40 for
  // every bound used here and keeping it simple keeps ports bit-exact.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    return next() % bound;
  }

  // 24 random bits mapped to [0, 1); exactly representable as float.
  constexpr float unit() noexcept {
    return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f);
  }

  // Parameter-fixture distribution: uniform in [-0.5, 0.5).
  constexpr float centered() noexcept { return unit() - 0.5f; }

 private:
  std::uint64_t state_;
};

}  // namespace gnnhls
