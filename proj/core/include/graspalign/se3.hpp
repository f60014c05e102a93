#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>

#include <graspalign/errors.hpp>

namespace graspalign {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Orthogonality drift below this is accepted as-is; between this and
// kRotationRepairTol the constructor re-projects; beyond it rejects.
inline constexpr double kRotationTol = 1e-9;
inline constexpr double kRotationRepairTol = 1e-6;

/// A 3x3 rotation matrix, kept orthonormal with det +1.
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}

  /// Validates orthonormality; re-projects near-misses up to 1e-6 drift.
  explicit Rotation3(const Mat3& m);

  const Mat3& matrix() const { return m_; }

  Rotation3 transposed() const;

  static Rotation3 identity() { return Rotation3(); }

  /// Rotation by `angle` radians about a (not necessarily unit) axis.
  static Rotation3 about_axis(const Vec3& axis, double angle);

 private:
  struct Unchecked {};
  Rotation3(const Mat3& m, Unchecked) : m_(m) {}

  Mat3 m_;

  friend Rotation3 procrustes_project(const Mat3&);
};

/// Rigid transform: x -> R x + t. Houses every pose in the pipeline.
class Transform3 {
 public:
  Transform3() = default;
  Transform3(const Rotation3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  const Rotation3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  /// Homogeneous 4x4 form; bottom row is exactly (0,0,0,1).
  Mat4 matrix() const;

  /// Validates the bottom row and the rotation block.
  static Transform3 from_matrix(const Mat4& m);

  static Transform3 identity() { return Transform3(); }

  Vec3 operator*(const Vec3& p) const {
    return rotation_.matrix() * p + translation_;
  }

 private:
  Rotation3 rotation_;
  Vec3 translation_{Vec3::Zero()};
};

/// Pinhole intrinsics without skew; K is upper triangular with K(2,2)=1.
struct Intrinsics {
  double fx = 0;
  double fy = 0;
  double cx = 0;
  double cy = 0;

  Eigen::Matrix3d K() const;
  void validate() const;
};

/// Row-batch of 3D points with optional per-point confidence.
struct DenseCloud {
  MatX3 points;
  std::optional<VecX> confidence;

  Eigen::Index size() const { return points.rows(); }
  void validate() const;
};

Transform3 compose(const Transform3& a, const Transform3& b);
Transform3 inverse(const Transform3& t);

/// Rows of `pts` mapped through x -> R x + t.
MatX3 transform_points(const MatX3& pts, const Transform3& t);

/// The row-batch shorthand {[Y,1] T^T}[:,0:3]; confidence carried through.
DenseCloud apply_points(const DenseCloud& cloud, const Transform3& t);

/// Nearest rotation to `m` in Frobenius norm (SVD with det correction).
/// Throws InvalidInput if m has rank < 2.
Rotation3 procrustes_project(const Mat3& m);

/// Reverse-mode derivative of procrustes_project at one input.
/// Holds the SVD of the input; adjoint() maps a gradient w.r.t. the
/// projected rotation to a gradient w.r.t. the raw 3x3 input.
class ProcrustesDerivative {
 public:
  explicit ProcrustesDerivative(const Mat3& m);

  const Mat3& rotation() const { return rotation_; }
  Mat3 adjoint(const Mat3& rotation_grad) const;

 private:
  Mat3 u_, v_;
  Vec3 sigma_;
  double det_sign_ = 1.0;
  Mat3 rotation_;
};

/// Geodesic angle between two rotations, in [0, pi].
double geodesic_angle(const Rotation3& a, const Rotation3& b);

/// rot_weight * geodesic angle + Euclidean translation distance.
double se3_distance(const Transform3& a, const Transform3& b,
                    double rot_weight);

// JSON serialization ("matrix": 16 row-major floats; intrinsics by name).
std::string transform_to_json(const Transform3& t);
Transform3 transform_from_json(const std::string& json_text);

}  // namespace graspalign
