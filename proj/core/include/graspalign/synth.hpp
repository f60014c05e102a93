#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <graspalign/coord_align.hpp>
#include <graspalign/kinematics.hpp>
#include <graspalign/pointmaps.hpp>

namespace graspalign {

/// Observation-noise model. With distance_scaling the sigmas grow linearly
/// with the object's camera distance, mirroring how pointmap pose errors
/// behave when the camera is far from the object.
struct NoiseSpec {
  double point_sigma = 0.0;       // meters
  double pose_rot_sigma = 0.0;    // radians
  double pose_trans_sigma = 0.0;  // meters
  bool distance_scaling = false;

  void validate() const;
};

enum class ObjectKind { kHammer, kBlock, kTape, kTeapot, kCustom };

ObjectKind object_kind_from_string(const std::string& name);
std::string to_string(ObjectKind kind);

/// Kind-specific shape parameters (meters):
///   hammer: {handle_len, handle_width, head_len, head_width}
///   block:  {sx, sy, sz}
///   tape:   {major_radius, minor_radius}
///   teapot: {body_radius, spout_length}
///   custom: boxes as consecutive {cx, cy, cz, sx, sy, sz}
/// Empty values use per-kind defaults. target_points in [2000, 20000].
struct ObjectParams {
  std::vector<double> values;
  int target_points = 4000;
};

/// Deterministic parametric surface cloud in the object frame (meters).
DenseCloud make_object(ObjectKind kind, const ObjectParams& params = {});

/// Named coordinates on the parametric objects (e.g. teapot "spout_tip").
Vec3 object_keypoint(ObjectKind kind, const ObjectParams& params,
                     const std::string& name);

/// A 6R desk-scale arm standing in for an unspecified real manipulator.
ChainSpec default_chain();

/// Fully-specified ground-truth scene. generate() inverts the estimation
/// pipeline's generative chain from these quantities.
struct Scenario {
  DenseCloud object_cloud;  // meters, object frame
  Transform3 H_true;
  Transform3 cam_base_true;
  double alpha_true = 1.0;
  ChainSpec chain;
  std::vector<Configuration> train_configs;
  std::vector<Configuration> test_configs;
  NoiseSpec noise;
  uint64_t seed = 0;
  Intrinsics intrinsics{600.0, 600.0, 320.0, 240.0};
  int image_width = 640;
  int image_height = 480;
  int raster_width = 24;   // pointmap raster
  int raster_height = 18;
  int render_subsample = 8;

  void validate() const;
};

struct GroundTruth {
  Transform3 H_true;
  double alpha_true = 1.0;
  Transform3 cam_base_true;
  std::vector<Transform3> train_camera_poses;  // true gauge camera poses
  std::vector<Transform3> test_ee_poses;
  std::vector<CameraObjectPose> test_cam_obj_poses;  // true, unscaled
  std::vector<BinaryRaster> test_masks;
};

struct ScenarioOutputs {
  AlignmentProblem problem;           // the already-aligned entry point
  std::vector<PairPrediction> pairs;  // the pairwise entry point
  GroundTruth truth;
  ChainSpec chain;                    // copied from the scenario
  std::vector<Configuration> train_configs;
  std::vector<Configuration> test_configs;
};

/// Simulates the scenario: recorded end-effector poses, unscaled camera
/// -object poses and reconstruction (with noise), pairwise pointmaps, and
/// ground truth including test-pose silhouettes. Emitted float payloads are
/// quantized to float32 so file round trips are exact.
ScenarioOutputs generate(const Scenario& scenario);

/// Writes problem JSON + PLY, PMAP pairs + manifest, ground-truth JSON and
/// the test set (poses JSON + PGM masks). Bit-reproducible per seed.
void export_scenario(const ScenarioOutputs& outputs,
                     const std::filesystem::path& dir);

/// JSON-facing scenario configuration (schema documented in the README).
struct ScenarioSpec {
  uint64_t seed = 0;
  ObjectKind kind = ObjectKind::kHammer;
  ObjectParams object_params;
  int n_train = 9;
  int n_test = 4;
  double alpha = 0.0;  // 0: sample in [0.5, 2.0]
  NoiseSpec noise;
  int raster_width = 24;
  int raster_height = 18;
  int image_width = 640;
  int image_height = 480;
  Intrinsics intrinsics{600.0, 600.0, 320.0, 240.0};
  int render_subsample = 8;
  std::optional<ChainSpec> chain;
};

ScenarioSpec load_scenario_spec(const std::filesystem::path& path);

/// Samples ground-truth poses and visible, depth-diverse configurations.
Scenario build_scenario(const ScenarioSpec& spec);

}  // namespace graspalign
