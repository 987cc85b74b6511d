/// Deterministic random stream.  std::normal_distribution is
/// implementation-defined, so the transforms are written out here to keep
/// simulated runs bit-reproducible across standard libraries.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace proxsim {

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (both variates consumed, one cached).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // avoid log(0)
    while (u1 <= 0.0) u1 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  /// Bernoulli trial.
  bool chance(double p) { return uniform01() < p; }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_{false};
  double spare_{0.0};
};

}  // namespace proxsim
