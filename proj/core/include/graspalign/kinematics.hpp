#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <graspalign/se3.hpp>

namespace graspalign {

using Configuration = VecX;

struct Joint {
  enum class Type { kRevolute, kPrismatic };
  Type type = Type::kRevolute;
  Transform3 parent_offset;
  Vec3 axis = Vec3::UnitZ();  // unit norm
  std::optional<std::pair<double, double>> limits;
};

/// Serial chain: per joint a fixed parent offset and a motion axis, plus a
/// fixed tip offset after the last joint.
struct ChainSpec {
  std::vector<Joint> joints;
  Transform3 tip_offset;

  int dof() const { return static_cast<int>(joints.size()); }
  void validate() const;
  /// Clamps each coordinate into the joint limits where limits exist.
  Configuration clamp(const Configuration& q) const;
  /// Conservative workspace radius: total length of all offsets.
  double reach() const;
};

/// Designated object-frame points tracked through the kinematic chain.
struct PointsOfInterest {
  MatX3 points;  // meters, object frame
  void validate() const;
};

struct IkOptions {
  double tol = 1e-4;
  int max_iters = 300;
  double damping = 0.1;        // damped-least-squares lambda
  double step_clamp = 0.2;     // per-joint update bound, rad or m
};

/// Forward kinematics phi(q).
Transform3 fk(const ChainSpec& chain, const Configuration& q);

/// Object points in the robot's frame: X' mapped through (phi(q) H)^-1.
MatX3 psi(const ChainSpec& chain, const Configuration& q, const Transform3& H,
          const PointsOfInterest& poi);

/// Damped-least-squares inverse kinematics from q0. Throws IkFailure with
/// the best residual when opts.max_iters is exhausted above opts.tol.
Configuration ik(const ChainSpec& chain, const Transform3& target,
                 const Configuration& q0, const IkOptions& opts = {});

/// Configuration that realizes a requested object pose in the base frame:
/// the required end-effector pose follows from the transform chain, then ik.
Configuration psi_inverse(const ChainSpec& chain,
                          const Transform3& object_pose_in_base,
                          const Transform3& H, const Configuration& q0,
                          const IkOptions& opts = {});

/// Rotates an object pose about the line through `pivot` (object frame)
/// with direction `axis` (base frame); the pivot's base-frame position is a
/// fixed point of the motion.
Transform3 pivot_goal(const Transform3& current_object_pose, const Vec3& pivot,
                      const Vec3& axis, double angle);

/// Least-squares object pose such that the object-frame points land on the
/// requested base-frame coordinates (rigid point fit).
Transform3 object_pose_from_points(const PointsOfInterest& poi,
                                   const MatX3& requested_base_points);

// ChainSpec JSON: {"joints":[{"type":"revolute","parent_offset":matrix16,
// "axis":[x,y,z],"limits":[lo,hi]}...],"tip_offset":matrix16}.
ChainSpec load_chain(const std::filesystem::path& path);
void save_chain(const std::filesystem::path& path, const ChainSpec& chain);

}  // namespace graspalign
