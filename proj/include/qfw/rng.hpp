// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace qfw {

// Bit mixer for deriving decorrelated stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG wrapper. std::uniform_real_distribution is
// implementation-defined, so all draws go through explicit conversions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in (-a, a).
  double uniform_symmetric(double a) { return a * (2.0 * uniform() - 1.0); }

  // Index drawn from normalized weights; weights must sum to ~1.
  template <typename Container>
  int categorical(const Container& probs) {
    const double u = uniform();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < int(probs.size()); ++i) {
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qfw
