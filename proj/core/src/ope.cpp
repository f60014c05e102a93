#include <graspalign/ope.hpp>

namespace graspalign {

CameraObjectPose CameraObjectPose::from_camera_pose(
    const Transform3& camera_pose) {
  const Transform3 inv = inverse(camera_pose);
  return CameraObjectPose{inv.rotation(), inv.translation()};
}

DenseCloud PosedCloud::cloud() const {
  return apply_points(*dense, pose.as_transform());
}

std::vector<PosedCloud> reinterpret(const GlobalAlignmentResult& result) {
  if (result.camera_poses.empty()) {
    throw InvalidInput("reinterpret: result has no camera poses");
  }
  result.dense.validate();
  auto shared = std::make_shared<DenseCloud>(result.dense);
  std::vector<PosedCloud> out;
  out.reserve(result.camera_poses.size());
  for (const auto& pose : result.camera_poses) {
    out.push_back(PosedCloud{CameraObjectPose::from_camera_pose(pose), shared});
  }
  return out;
}

Transform3 scaled_pose(const CameraObjectPose& pose, double alpha) {
  if (!(alpha > 0.0)) {
    throw InvalidInput("scaled_pose: alpha must be positive");
  }
  return Transform3(pose.rotation, alpha * pose.translation);
}

}  // namespace graspalign
