#pragma once

// Deterministic random sampling. Distributions are implemented here rather
// than taken from <random> so that a seed fully specifies the byte stream
// independent of the standard library.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>

namespace graspalign::detail {

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform() {
    // 53-bit mantissa draw in [0, 1).
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    // Box-Muller; one value per draw keeps the stream position simple.
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::Vector3d gaussian3() {
    Eigen::Vector3d v;
    v << gaussian(), gaussian(), gaussian();
    return v;
  }

  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d v = gaussian3();
    while (v.norm() < 1e-9) {
      v = gaussian3();
    }
    return v.normalized();
  }

  /// Substream derived from this seed and a stream index.
  static Rng stream(uint64_t seed, uint64_t index) {
    return Rng(seed * 0x9E3779B97F4A7C15ull + index * 0xD1B54A32D192ED03ull +
               1ull);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace graspalign::detail
