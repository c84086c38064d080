#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace gear {

/// Portable seeded generator: std::mt19937_64 for raw bits, with the uniform
/// and normal transforms written out here. The standard distributions are
/// implementation-defined, so using them would make traces differ between
/// standard libraries.
///
///   uniform(): top 53 bits of one draw scaled by 2^-53, in [0, 1)
///   normal():  Box-Muller on two uniforms; the second variate is cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace gear
