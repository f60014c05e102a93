#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <graspalign/detail/estimator_chain.hpp>
#include <graspalign/ope.hpp>
#include <graspalign/se3.hpp>

namespace graspalign {

// Points closer to the camera plane than this (gauge units) are rejected
// by the projection.
inline constexpr double kDepthEpsilon = 1e-6;

/// Inputs of the coordinate-alignment problem: recorded end-effector poses
/// (meters), per-pose object-to-camera poses and the dense reconstruction
/// (both in the reconstruction's gauge), plus camera intrinsics.
struct AlignmentProblem {
  std::vector<Transform3> ee_poses;
  std::vector<CameraObjectPose> cam_obj_poses;
  DenseCloud dense;
  Intrinsics intrinsics;
  int render_subsample = 8;

  int pose_count() const { return static_cast<int>(ee_poses.size()); }
  void validate() const;
};

struct AlignmentSolution {
  Transform3 H;             // end-effector-to-object transform, meters
  double alpha = 1.0;       // gauge-to-meters scale
  double final_loss = 0.0;  // pixels, computed without subsampling
  VecX per_pose_residuals;  // pixels
  Transform3 cam_base;      // diagnostic: pose-averaged camera-base product
  double cam_base_spread = 0.0;
};

struct SolverOptions {
  int max_iters = 2000;
  double lr_pose = 1e-2;       // rotation block and translation
  double lr_log_alpha = 5e-3;  // log-scale parameter
  // Identity, then spread rotations (a group cover), then seeded random.
  int n_starts = 24;
  uint64_t seed = 0;
  std::optional<double> init_alpha;  // overrides the spread-ratio seed
  double divergence_guard_px = 1e6;
  double early_stop_loss_px = 1e-8;  // skip further starts below this
  int threads = 1;
};

/// A_{n,m}: relative end-effector transform between poses n and m.
Transform3 relative_ee(int n, int m, const std::vector<Transform3>& ee_poses);

enum class MeanMode {
  kMatrix,  // arithmetic 4x4 mean, rotation re-projected (default)
  kLie      // rotation Karcher mean with arithmetic translations
};

/// f_n(H, alpha): the pose-n object-to-camera estimate built from every
/// other pose through the end-effector motion conjugated by H.
Transform3 estimator(int n, const Transform3& H, double alpha,
                     const AlignmentProblem& problem,
                     MeanMode mode = MeanMode::kMatrix);

/// Pinhole projection of every row; index-preserving. Throws InvalidInput
/// naming the first point with depth <= kDepthEpsilon.
MatX2 project_points(const Intrinsics& intrinsics, const MatX3& points);

/// The rendered-pixel objective: mean pixel distance, over poses and
/// subsampled point indices, between the reconstruction under the pose-n
/// camera and under the estimator. Throws InvalidInput (with the pose
/// index) when transformed points fall behind the camera.
double rendered_loss(const Transform3& H, double alpha,
                     const AlignmentProblem& problem);

/// First-order minimization of rendered_loss over (H, alpha) with rotation
/// re-projection after every step and multi-start. Deterministic per seed.
AlignmentSolution solve_alignment(const AlignmentProblem& problem,
                                  const SolverOptions& opts = {});

/// Pose-averaged product of base->camera chains; per-pose spread reported
/// through the optional out-parameter.
Transform3 camera_base(const AlignmentSolution& solution,
                       const AlignmentProblem& problem,
                       double* spread = nullptr);

/// Applies the pointmap gauge freedom: dense moves by G and every implied
/// camera pose is left-composed with G. Used to check gauge invariance.
AlignmentProblem regauge(const AlignmentProblem& problem, const Transform3& g);

// Problem / solution files (JSON + PLY sidecar for the dense cloud).
AlignmentProblem load_problem(const std::filesystem::path& path);
void save_problem(const std::filesystem::path& path,
                  const AlignmentProblem& problem,
                  const std::string& dense_ply_name = "dense.ply");
AlignmentSolution load_solution(const std::filesystem::path& path);
void save_solution(const std::filesystem::path& path,
                   const AlignmentSolution& solution,
                   const std::string& method = "");

/// Raw 13-parameter objective (9 rotation-block entries column-major,
/// translation, log alpha) over a gauge-canonicalized copy of the problem.
/// Exists so solver steps and derivative checks can work off-manifold.
class CoordObjective {
 public:
  static constexpr int kParamCount = 13;

  CoordObjective(const AlignmentProblem& problem, int subsample,
                 int threads = 1);

  double loss(const VecX& params) const;
  double loss_and_grad(const VecX& params, VecX& grad) const;
  VecX per_pose_residuals(const VecX& params) const;

  VecX pack(const Transform3& H, double alpha) const;
  std::pair<Transform3, double> unpack(const VecX& params) const;
  void project_rotation(VecX& params) const;

  int pose_count() const { return pose_count_; }
  Eigen::Index sample_count() const { return samples_.rows(); }

  /// Scale seed: ratio of end-effector to camera translation spreads.
  double alpha_seed() const;

 private:
  double eval(const VecX& params, VecX* grad, VecX* residuals) const;

  std::vector<Mat4> ee_;                         // E_n, meters
  std::optional<detail::EstimatorChain> chain_;  // conjugation machinery
  MatX3 samples_;  // subsampled dense points, canonical gauge
  MatX2 target_;   // stacked per-pose target pixels
  Intrinsics intrinsics_;
  int pose_count_ = 0;
  int threads_ = 1;
};

}  // namespace graspalign
