#pragma once

#include <filesystem>
#include <vector>

#include <graspalign/coord_align.hpp>

namespace graspalign {

/// Structured baseline: identical estimator, but the objective is the mean
/// SE(3) distance between f_n(H, alpha) and the pose-n camera-object pose
/// instead of rendered pixel distances. Reported final_loss and residuals
/// are still rendered-pixel metrics when the recovered transform admits
/// them, for comparability.
AlignmentSolution solve_no_render(const AlignmentProblem& problem,
                                  const SolverOptions& opts = {},
                                  double rot_weight = 1.0);

/// Fixed feedforward regressor from a flattened end-effector pose
/// (9 rotation + 3 translation) to an object-pose parameterization
/// (9 rotation, projected on use, + 3 translation). 12 -> 64 -> 64 -> 12
/// with tanh activations.
struct RegressorParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<VecX> biases;

  void validate() const;
  static RegressorParams initialize(uint64_t seed);
};

struct RegressorOptions {
  int max_iters = 3000;
  double lr = 3e-3;
  double rot_weight = 1.0;
  uint64_t seed = 0;
};

/// Gradient-descent fit of the regressor on (end-effector pose, unscaled
/// camera-object pose) pairs, minimizing the SE(3) distance. Accepted-step
/// losses (non-increasing) are appended to loss_trace when given.
RegressorParams train_direct(const std::vector<Transform3>& ee_poses,
                             const std::vector<CameraObjectPose>& cam_obj_poses,
                             const RegressorOptions& opts = {},
                             std::vector<double>* loss_trace = nullptr);

/// Forward pass; the rotation block is Procrustes-projected.
Transform3 predict_direct(const RegressorParams& params,
                          const Transform3& ee_pose);

// RegressorParams JSON: array of {"weights": [[...]], "bias": [...]}.
void save_regressor(const std::filesystem::path& path,
                    const RegressorParams& params);
RegressorParams load_regressor(const std::filesystem::path& path);

}  // namespace graspalign
