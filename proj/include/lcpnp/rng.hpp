#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lcpnp {

/// Deterministic random source. All draws are derived from the raw 64-bit
/// stream, so identical seeds give identical sequences on every platform
/// (std::normal_distribution and friends do not guarantee that).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n), unbiased.
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return static_cast<int>(v % bound);
  }

  /// Seed for an independent per-task stream (task index folded into seed).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t task_index) {
    return seed ^ task_index;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lcpnp
