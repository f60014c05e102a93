#pragma once

// Internal rotation/transform log-exp helpers. Not part of the public
// surface; used by solvers, the pose sampler and the IK error term.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace graspalign::detail {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    return Eigen::Matrix3d::Identity() + skew(w);
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

// Exponential with rotation omega and translation part applied directly
// (not the full SE(3) V-matrix): T = [exp(omega), t]. Sufficient for
// sampling small perturbations and averaging poses.
inline Eigen::Matrix4d rt_exp(const Eigen::Vector3d& omega,
                              const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = so3_exp(omega);
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace graspalign::detail
