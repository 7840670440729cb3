#pragma once

#include <cmath>
#include <cstdint>

namespace mlab {

// splitmix64: the output at step i is a pure function of (state0 + i*gamma), so
// seeding a fresh instance per work chunk gives independent, order-free streams.
struct SplitMix64 {
  uint64_t state;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1) with 53 random bits
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // unbiased integer in [0, bound) by rejection
  uint32_t next_below(uint32_t bound) {
    uint64_t threshold = (~uint64_t{0} - bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return static_cast<uint32_t>(r % bound);
    }
  }

  double next_exponential(double rate) { return -std::log1p(-next_unit()) / rate; }
};

// Decorrelates (seed, stream) pairs; distinct streams from one user seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  g.next_u64();
  return g.next_u64();
}

}  // namespace mlab
