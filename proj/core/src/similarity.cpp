#include <graspalign/similarity.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

namespace graspalign {

namespace {

SimilarityFit fit_impl(const MatX3& src, const MatX3& dst, const VecX* weights,
                       bool with_scale) {
  if (src.rows() != dst.rows()) {
    throw InvalidInput("fit_similarity: point count mismatch");
  }
  if (src.rows() < 3) {
    throw InvalidInput("fit_similarity: need at least 3 correspondences");
  }
  VecX w = weights ? *weights : VecX::Ones(src.rows());
  if (w.size() != src.rows() || (w.array() < 0.0).any()) {
    throw InvalidInput("fit_similarity: bad weights");
  }
  const double wsum = w.sum();
  if (wsum <= 0.0) {
    throw InvalidInput("fit_similarity: zero total weight");
  }
  w /= wsum;

  const Vec3 mu_src = src.transpose() * w;
  const Vec3 mu_dst = dst.transpose() * w;
  const MatX3 cs = src.rowwise() - mu_src.transpose();
  const MatX3 cd = dst.rowwise() - mu_dst.transpose();

  // Weighted cross-covariance and source variance.
  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    cov += w(i) * cd.row(i).transpose() * cs.row(i);
    var_src += w(i) * cs.row(i).squaredNorm();
  }
  if (var_src <= 1e-18) {
    throw InvalidInput("fit_similarity: degenerate source points");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) <= 1e-14 * std::max(1.0, svd.singularValues()(0))) {
    throw InvalidInput("fit_similarity: rank-deficient configuration");
  }
  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2) = -1.0;
  }
  const Mat3 r =
      svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();

  double scale = 1.0;
  if (with_scale) {
    scale = (svd.singularValues().array() * d.array()).sum() / var_src;
    if (!(scale > 0.0)) {
      throw InvalidInput("fit_similarity: non-positive scale");
    }
  }

  const Vec3 t = mu_dst - scale * r * mu_src;
  SimilarityFit fit;
  fit.scale = scale;
  fit.transform = Transform3(Rotation3(r), t);

  double ss = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const Vec3 res =
        dst.row(i).transpose() - (scale * r * src.row(i).transpose() + t);
    ss += w(i) * res.squaredNorm();
  }
  fit.rms = std::sqrt(ss);
  return fit;
}

}  // namespace

SimilarityFit fit_similarity(const MatX3& src, const MatX3& dst,
                             const VecX* weights) {
  return fit_impl(src, dst, weights, true);
}

SimilarityFit fit_rigid(const MatX3& src, const MatX3& dst,
                        const VecX* weights) {
  return fit_impl(src, dst, weights, false);
}

}  // namespace graspalign
