// Copyright 2026 The cpt4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace cpt4d {

// Seed mixing for derived streams (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1) +
                    0xbf58476d1ce4e5b9ull * (c + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled value mappings. std::uniform_real_distribution
// is implementation-defined, so distributions are done here to keep streams
// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Uniform integer in [0, n), unbiased enough for sampling (128-bit scale).
  std::uint64_t next_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace cpt4d
