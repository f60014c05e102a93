#pragma once

#include <memory>
#include <vector>

#include <graspalign/global_align.hpp>
#include <graspalign/se3.hpp>

namespace graspalign {

/// Rotation/translation blocks of an inverted camera pose: the pose of the
/// reconstruction relative to a stationary camera, up to the global scale.
struct CameraObjectPose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();

  Transform3 as_transform() const {
    return Transform3(rotation, translation);
  }

  static CameraObjectPose from_camera_pose(const Transform3& camera_pose);
};

/// The pose-n view of a shared reconstruction. The transformed cloud is
/// materialized on demand; N eager copies of a dense cloud are memory-heavy
/// and the semantics are identical.
struct PosedCloud {
  CameraObjectPose pose;
  std::shared_ptr<const DenseCloud> dense;

  DenseCloud cloud() const;
};

/// Reinterprets a moving-camera solution as a stationary camera observing
/// a moving object: per pose n the cloud becomes dense transformed by the
/// inverse camera pose.
std::vector<PosedCloud> reinterpret(const GlobalAlignmentResult& result);

/// [^C T_O]_n(alpha): rotation unchanged, translation scaled by alpha > 0.
Transform3 scaled_pose(const CameraObjectPose& pose, double alpha);

}  // namespace graspalign
