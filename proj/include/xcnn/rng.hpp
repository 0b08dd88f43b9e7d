#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace xcnn {

// Deterministic random source. Draws are implemented on top of the raw
// mt19937 word stream (not std distributions) so sequences are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(uint32_t seed) : gen_(seed) {}

  uint32_t next_u32() { return gen_(); }

  // Uniform in [0,1) with 24-bit resolution.
  double next_unit() { return (gen_() >> 8) * (1.0 / 16777216.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  double gaussian(double mean, double stddev);

  // Uniform integer in [0,n), rejection sampled.
  uint32_t below(uint32_t n);

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int64_t> permutation(int64_t n);

  bool coin() { return (gen_() & 1u) != 0; }

  // Splits a derived stream so epoch k of a run seeded with s is
  // reproducible in isolation.
  static Rng derive(uint32_t seed, uint32_t stream, uint32_t index);

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xcnn
