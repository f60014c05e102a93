#include <graspalign/evaluation.hpp>

#include <cmath>

#include <graspalign/detail/lie.hpp>

namespace graspalign {

namespace {

// Projection for evaluation: behind-camera or absurdly out-of-frame points
// are dropped rather than raised, since bad methods legitimately produce
// them. An empty projection scores one image diagonal per silhouette pixel.
PixelSet project_clipped(const MatX3& pts, const Intrinsics& k,
                         int subsample) {
  std::vector<Vec2> kept;
  const double guard = 20.0 * (std::abs(k.cx) + std::abs(k.cy) + 1000.0);
  for (Eigen::Index i = 0; i < pts.rows(); i += subsample) {
    const double w = pts(i, 2);
    if (!(w > kDepthEpsilon)) {
      continue;
    }
    const double u = (k.fx * pts(i, 0) + k.cx * w) / w;
    const double v = (k.fy * pts(i, 1) + k.cy * w) / w;
    if (std::abs(u) > guard || std::abs(v) > guard) {
      continue;
    }
    kept.emplace_back(u, v);
  }
  PixelSet set;
  set.points.resize(static_cast<Eigen::Index>(kept.size()), 2);
  for (size_t i = 0; i < kept.size(); ++i) {
    set.points.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  }
  return set;
}

PoseEval score(const PixelSet& projection, const BinaryRaster& mask) {
  const PixelSet silhouette = silhouette_pixels(mask);
  PoseEval eval;
  if (projection.points.rows() == 0) {
    const double diag = std::hypot(static_cast<double>(mask.width),
                                   static_cast<double>(mask.height));
    eval.d_ab = diag;
    eval.d_ba = diag;
    eval.d_hat = diag;
    return eval;
  }
  eval.d_ab = avg_min_distance(projection, silhouette);
  eval.d_ba = avg_min_distance(silhouette, projection);
  eval.d_hat = 0.5 * (eval.d_ab + eval.d_ba);
  return eval;
}

EvalReport finalize(std::vector<PoseEval> per_pose) {
  EvalReport report;
  report.per_pose = std::move(per_pose);
  double sum = 0.0;
  for (const auto& p : report.per_pose) {
    sum += p.d_hat;
  }
  report.mean_d_hat =
      report.per_pose.empty()
          ? 0.0
          : sum / static_cast<double>(report.per_pose.size());
  return report;
}

}  // namespace

Transform3 estimate_pose_at(const Transform3& ee_pose, const Transform3& H,
                            double alpha, const AlignmentProblem& problem,
                            MeanMode mode) {
  problem.validate();
  if (!(alpha > 0.0)) {
    throw InvalidInput("estimate_pose_at: alpha must be positive");
  }
  const Transform3 h_inv = inverse(H);
  const Transform3 ee_inv = inverse(ee_pose);
  std::vector<Transform3> terms;
  terms.reserve(problem.ee_poses.size());
  for (size_t m = 0; m < problem.ee_poses.size(); ++m) {
    const Transform3 conj = compose(
        compose(h_inv, compose(ee_inv, problem.ee_poses[m])), H);
    terms.push_back(
        compose(conj, scaled_pose(problem.cam_obj_poses[m], alpha)));
  }
  if (mode == MeanMode::kMatrix) {
    Mat4 sum = Mat4::Zero();
    for (const auto& t : terms) {
      sum += t.matrix();
    }
    sum /= static_cast<double>(terms.size());
    return Transform3(procrustes_project(sum.topLeftCorner<3, 3>()),
                      sum.topRightCorner<3, 1>());
  }
  Mat3 r = terms.front().rotation().matrix();
  for (int iter = 0; iter < 8; ++iter) {
    Vec3 delta = Vec3::Zero();
    for (const auto& t : terms) {
      delta += detail::so3_log(r.transpose() * t.rotation().matrix());
    }
    delta /= static_cast<double>(terms.size());
    r = r * detail::so3_exp(delta);
    if (delta.norm() < 1e-14) {
      break;
    }
  }
  Vec3 t_mean = Vec3::Zero();
  for (const auto& t : terms) {
    t_mean += t.translation();
  }
  t_mean /= static_cast<double>(terms.size());
  return Transform3(procrustes_project(r), t_mean);
}

PixelSet project_prediction(const DenseCloud& dense, const Transform3& pose,
                            double alpha, const Intrinsics& intrinsics,
                            int subsample) {
  const Transform3 gauge_pose(pose.rotation(), pose.translation() / alpha);
  return project_clipped(transform_points(dense.points, gauge_pose),
                         intrinsics, std::max(1, subsample));
}

PixelSet project_prediction_gauge(const DenseCloud& dense,
                                  const Transform3& pose,
                                  const Intrinsics& intrinsics,
                                  int subsample) {
  return project_clipped(transform_points(dense.points, pose), intrinsics,
                         std::max(1, subsample));
}

EvalReport evaluate_solution(const AlignmentProblem& problem,
                             const Transform3& H, double alpha,
                             const std::vector<TestPose>& test_poses,
                             int subsample) {
  std::vector<PoseEval> evals;
  evals.reserve(test_poses.size());
  for (const auto& test : test_poses) {
    const Transform3 predicted =
        estimate_pose_at(test.ee_pose, H, alpha, problem);
    const PixelSet projection = project_prediction(
        problem.dense, predicted, alpha, problem.intrinsics, subsample);
    evals.push_back(score(projection, test.mask));
  }
  return finalize(std::move(evals));
}

EvalReport evaluate_regressor(const AlignmentProblem& problem,
                              const RegressorParams& params,
                              const std::vector<TestPose>& test_poses,
                              int subsample) {
  std::vector<PoseEval> evals;
  evals.reserve(test_poses.size());
  for (const auto& test : test_poses) {
    const Transform3 predicted = predict_direct(params, test.ee_pose);
    const PixelSet projection = project_prediction_gauge(
        problem.dense, predicted, problem.intrinsics, subsample);
    evals.push_back(score(projection, test.mask));
  }
  return finalize(std::move(evals));
}

}  // namespace graspalign
