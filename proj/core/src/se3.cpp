#include <graspalign/se3.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include <json.hpp>

namespace graspalign {

namespace {

double orthogonality_drift(const Mat3& m) {
  const double gram = (m.transpose() * m - Mat3::Identity())
                          .cwiseAbs()
                          .maxCoeff();
  const double det = std::abs(m.determinant() - 1.0);
  return std::max(gram, det);
}

}  // namespace

Rotation3::Rotation3(const Mat3& m) {
  if (!m.allFinite()) {
    throw InvalidInput("Rotation3: non-finite matrix");
  }
  const double drift = orthogonality_drift(m);
  if (drift <= kRotationTol) {
    m_ = m;
  } else if (drift <= kRotationRepairTol) {
    m_ = procrustes_project(m).matrix();
  } else {
    throw InvalidInput("Rotation3: matrix is not a rotation (drift " +
                       std::to_string(drift) + ")");
  }
}

Rotation3 Rotation3::transposed() const {
  return Rotation3(m_.transpose(), Unchecked{});
}

Rotation3 Rotation3::about_axis(const Vec3& axis, double angle) {
  const double norm = axis.norm();
  if (norm < 1e-12) {
    throw InvalidInput("Rotation3::about_axis: zero axis");
  }
  return Rotation3(
      Eigen::AngleAxisd(angle, axis / norm).toRotationMatrix(), Unchecked{});
}

Mat4 Transform3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Transform3 Transform3::from_matrix(const Mat4& m) {
  if (!m.allFinite()) {
    throw InvalidInput("Transform3: non-finite matrix");
  }
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
    throw InvalidInput("Transform3: bottom row must be (0,0,0,1)");
  }
  return Transform3(Rotation3(m.topLeftCorner<3, 3>()),
                    m.topRightCorner<3, 1>());
}

Eigen::Matrix3d Intrinsics::K() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidInput("Intrinsics: focal lengths must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidInput("Intrinsics: non-finite principal point");
  }
}

void DenseCloud::validate() const {
  if (points.rows() < 1) {
    throw InvalidInput("DenseCloud: empty point set");
  }
  if (!points.allFinite()) {
    throw InvalidInput("DenseCloud: non-finite coordinates");
  }
  if (confidence) {
    if (confidence->size() != points.rows()) {
      throw InvalidInput("DenseCloud: confidence length mismatch");
    }
    if ((confidence->array() < 0.0).any()) {
      throw InvalidInput("DenseCloud: negative confidence");
    }
  }
}

Transform3 compose(const Transform3& a, const Transform3& b) {
  const Mat3 r = a.rotation().matrix() * b.rotation().matrix();
  const Vec3 t = a.rotation().matrix() * b.translation() + a.translation();
  return Transform3(Rotation3(r), t);
}

Transform3 inverse(const Transform3& t) {
  const Rotation3 rt = t.rotation().transposed();
  return Transform3(rt, -(rt.matrix() * t.translation()));
}

MatX3 transform_points(const MatX3& pts, const Transform3& t) {
  MatX3 out = pts * t.rotation().matrix().transpose();
  out.rowwise() += t.translation().transpose();
  return out;
}

DenseCloud apply_points(const DenseCloud& cloud, const Transform3& t) {
  cloud.validate();
  return DenseCloud{transform_points(cloud.points, t), cloud.confidence};
}

Rotation3 procrustes_project(const Mat3& m) {
  if (!m.allFinite()) {
    throw InvalidInput("procrustes_project: non-finite matrix");
  }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(1) <= 1e-12 * std::max(1.0, sigma(0))) {
    throw InvalidInput("procrustes_project: matrix has rank < 2");
  }
  const double s =
      (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0
                                                                      : 1.0;
  Mat3 r = svd.matrixU() * Vec3(1.0, 1.0, s).asDiagonal() *
           svd.matrixV().transpose();
  return Rotation3(r, Rotation3::Unchecked{});
}

ProcrustesDerivative::ProcrustesDerivative(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  sigma_ = svd.singularValues();
  det_sign_ = (u_ * v_.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  rotation_ =
      u_ * Vec3(1.0, 1.0, det_sign_).asDiagonal() * v_.transpose();
}

Mat3 ProcrustesDerivative::adjoint(const Mat3& rotation_grad) const {
  // With m = U diag(sigma) V^T and R = U diag(1,1,s) V^T, the differential
  // dR = U [a G_ij + b G_ji] V^T in the rotated frame G = U^T dm V, with
  // pair coefficients a, b below. The adjoint applies the same pair mixing
  // to W = U^T grad V.
  const Mat3 w = u_.transpose() * rotation_grad * v_;
  Mat3 g = Mat3::Zero();
  const double d[3] = {1.0, 1.0, det_sign_};
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      double a, b;
      if (d[i] == d[j]) {
        const double denom = std::max(sigma_(i) + sigma_(j), 1e-12);
        a = 1.0 / denom;
        b = -a;
      } else {
        // Mixed-sign pair only occurs for det < 0; singular when the two
        // singular values coincide (the nearest rotation is non-unique).
        const double denom = std::max(sigma_(i) - sigma_(j), 1e-12);
        a = 1.0 / denom;
        b = a;
      }
      g(i, j) = a * w(i, j) + b * w(j, i);
      g(j, i) = a * w(j, i) + b * w(i, j);
    }
  }
  return u_ * g * v_.transpose();
}

double geodesic_angle(const Rotation3& a, const Rotation3& b) {
  const double tr = (a.matrix().transpose() * b.matrix()).trace();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

double se3_distance(const Transform3& a, const Transform3& b,
                    double rot_weight) {
  if (!(rot_weight > 0.0)) {
    throw InvalidInput("se3_distance: rot_weight must be positive");
  }
  return rot_weight * geodesic_angle(a.rotation(), b.rotation()) +
         (a.translation() - b.translation()).norm();
}

std::string transform_to_json(const Transform3& t) {
  nlohmann::json j;
  const Mat4 m = t.matrix();
  std::vector<double> flat(16);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      flat[static_cast<size_t>(r) * 4 + c] = m(r, c);
    }
  }
  j["matrix"] = flat;
  return j.dump();
}

Transform3 transform_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.contains("matrix") || !j["matrix"].is_array() ||
      j["matrix"].size() != 16) {
    throw InvalidInput("Transform3 JSON: expected 16-element \"matrix\"");
  }
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = j["matrix"][static_cast<size_t>(r) * 4 + c].get<double>();
    }
  }
  return Transform3::from_matrix(m);
}

}  // namespace graspalign
