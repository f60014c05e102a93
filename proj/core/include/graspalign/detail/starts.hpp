#pragma once

// Multi-start rotation schedule: identity, then the remaining 23 rotations
// of the chiral octahedral group (every rotation is within ~62 degrees of
// one of them), then seeded random rotations.

#include <cmath>
#include <vector>

#include <graspalign/detail/rng.hpp>
#include <graspalign/se3.hpp>

namespace graspalign::detail {

inline Rotation3 start_rotation(int index, uint64_t seed) {
  if (index <= 0) {
    return Rotation3::identity();
  }
  static const std::vector<std::pair<Vec3, double>> kCubeGroup = [] {
    std::vector<std::pair<Vec3, double>> r;
    const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    for (const auto& a : axes) {
      r.emplace_back(a, M_PI);
      r.emplace_back(a, M_PI / 2.0);
      r.emplace_back(a, -M_PI / 2.0);
    }
    for (double sx : {1.0, -1.0}) {
      for (double sy : {1.0, -1.0}) {
        const Vec3 v = Vec3(sx, sy, 1.0).normalized();
        r.emplace_back(v, 2.0 * M_PI / 3.0);
        r.emplace_back(v, -2.0 * M_PI / 3.0);
      }
    }
    const Vec3 edges[6] = {Vec3(1, 1, 0),  Vec3(1, -1, 0), Vec3(1, 0, 1),
                           Vec3(1, 0, -1), Vec3(0, 1, 1),  Vec3(0, 1, -1)};
    for (const auto& e : edges) {
      r.emplace_back(e.normalized(), M_PI);
    }
    return r;
  }();
  if (static_cast<size_t>(index - 1) < kCubeGroup.size()) {
    const auto& [axis, angle] = kCubeGroup[static_cast<size_t>(index - 1)];
    return Rotation3::about_axis(axis, angle);
  }
  auto rng = Rng::stream(seed, static_cast<uint64_t>(index));
  return Rotation3::about_axis(rng.unit_vector(), rng.uniform(0.0, M_PI));
}

}  // namespace graspalign::detail
