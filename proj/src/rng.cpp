#include "xcnn/rng.hpp"

#include <cmath>
#include <numbers>

namespace xcnn {

double Rng::gaussian(double mean, double stddev) {
  // Box-Muller, caching the second value.
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

uint32_t Rng::below(uint32_t n) {
  if (n <= 1) return 0;
  uint32_t limit = UINT32_MAX - UINT32_MAX % n;
  uint32_t v = gen_();
  while (v >= limit) v = gen_();
  return v % n;
}

std::vector<int64_t> Rng::permutation(int64_t n) {
  std::vector<int64_t> p(n);
  for (int64_t i = 0; i < n; ++i) p[i] = i;
  for (int64_t i = n - 1; i > 0; --i) {
    uint32_t j = below(static_cast<uint32_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

Rng Rng::derive(uint32_t seed, uint32_t stream, uint32_t index) {
  // splitmix-style mixing so adjacent (seed, stream, index) triples give
  // unrelated generators.
  uint64_t z = (uint64_t(seed) << 32) ^ (uint64_t(stream) << 20) ^ index;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return Rng(static_cast<uint32_t>(z ^ (z >> 32)));
}

}  // namespace xcnn
