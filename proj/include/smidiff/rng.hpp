//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_RNG_HPP_
#define SMIDIFF_RNG_HPP_

#include <cstdint>
#include <random>

namespace smidiff {

// Explicit random state threaded through every stochastic operation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0): engine_(seed) { }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  // Inclusive on both ends.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

  // Independent child stream, e.g. one per molecule in a batch.
  Rng fork(std::uint64_t stream) {
    return Rng(splitmix(next_u64() ^ splitmix(stream + 0x9e3779b97f4a7c15ULL)));
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 &engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace smidiff

#endif  // SMIDIFF_RNG_HPP_
