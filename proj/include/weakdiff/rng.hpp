#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace weakdiff {

// Mixes a base seed with a stream index so independent consumers (per-sample
// samplers, eval batches, data generation) never share a generator state.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded generator. All randomness in the library flows through explicit
// instances of this class; nothing reads ambient entropy.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  // Uniform integer in [lo, hi].
  int integer(int lo, int hi);

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace weakdiff
