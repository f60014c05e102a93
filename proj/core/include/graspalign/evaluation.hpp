#pragma once

#include <vector>

#include <graspalign/baselines.hpp>
#include <graspalign/coord_align.hpp>
#include <graspalign/metrics.hpp>

namespace graspalign {

/// Estimator chain evaluated at an arbitrary (held-out) end-effector pose:
/// the projected mean over all training poses m of
/// (H^-1 (E^-1 E_m) H) [^C T_O]_m(alpha).
Transform3 estimate_pose_at(const Transform3& ee_pose, const Transform3& H,
                            double alpha, const AlignmentProblem& problem,
                            MeanMode mode = MeanMode::kMatrix);

struct TestPose {
  Transform3 ee_pose;
  BinaryRaster mask;  // ground-truth silhouette
};

struct PoseEval {
  double d_ab = 0.0;   // projection -> silhouette
  double d_ba = 0.0;   // silhouette -> projection
  double d_hat = 0.0;  // symmetrized
};

struct EvalReport {
  std::vector<PoseEval> per_pose;
  double mean_d_hat = 0.0;
};

/// Projects the reconstruction under a predicted object-to-camera transform
/// whose translation is metric (the estimator convention): the translation
/// is converted to the reconstruction's gauge before rendering.
PixelSet project_prediction(const DenseCloud& dense, const Transform3& pose,
                            double alpha, const Intrinsics& intrinsics,
                            int subsample = 1);

/// As above for transforms already in gauge units (regressor outputs).
PixelSet project_prediction_gauge(const DenseCloud& dense,
                                  const Transform3& pose,
                                  const Intrinsics& intrinsics,
                                  int subsample = 1);

/// Symmetrized pixel distance of a structured solution at every test pose.
EvalReport evaluate_solution(const AlignmentProblem& problem,
                             const Transform3& H, double alpha,
                             const std::vector<TestPose>& test_poses,
                             int subsample = 1);

/// Symmetrized pixel distance of the direct regressor at every test pose.
EvalReport evaluate_regressor(const AlignmentProblem& problem,
                              const RegressorParams& params,
                              const std::vector<TestPose>& test_poses,
                              int subsample = 1);

}  // namespace graspalign
