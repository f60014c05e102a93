#pragma once

// Forward and reverse-mode machinery for the estimator conjugation chain
//   B_n = mean_{m != n} (H^-1 A_{n,m} H) C_m(alpha)
// over the raw 13 parameters (rotation block, translation, log alpha).
// Shared by the rendered objective and the pose-space baseline.

#include <Eigen/Dense>

#include <vector>

#include <graspalign/se3.hpp>

namespace graspalign::detail {

struct ChainParams {
  Mat3 m;
  Vec3 t;
  double alpha = 1.0;
  Mat4 h = Mat4::Identity();
  Mat4 h_inv = Mat4::Identity();
};

struct ChainGrad {
  Mat4 g_h = Mat4::Zero();
  Mat4 g_h_inv = Mat4::Zero();
  double d_alpha = 0.0;

  ChainGrad& operator+=(const ChainGrad& o) {
    g_h += o.g_h;
    g_h_inv += o.g_h_inv;
    d_alpha += o.d_alpha;
    return *this;
  }
};

class EstimatorChain {
 public:
  EstimatorChain(const std::vector<Mat4>& ee,
                 const std::vector<Mat3>& cam_rot,
                 const std::vector<Vec3>& cam_trans)
      : cam_rot_(cam_rot), cam_trans_(cam_trans) {
    const int n = static_cast<int>(ee.size());
    rel_.resize(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      const Mat4 inv = rigid_inverse(ee[static_cast<size_t>(i)]);
      for (int j = 0; j < n; ++j) {
        rel_[static_cast<size_t>(i) * n + j] = inv * ee[static_cast<size_t>(j)];
      }
    }
  }

  int pose_count() const { return static_cast<int>(cam_rot_.size()); }
  const Mat3& cam_rot(int n) const { return cam_rot_[static_cast<size_t>(n)]; }
  const Vec3& cam_trans(int n) const {
    return cam_trans_[static_cast<size_t>(n)];
  }

  /// Parses the 13 raw parameters; throws InvalidInput on a singular block.
  ChainParams parse(const VecX& params) const {
    ChainParams p;
    for (int c = 0; c < 3; ++c) {
      p.m.col(c) = params.segment<3>(3 * c);
    }
    p.t = params.segment<3>(9);
    p.alpha = std::exp(params(12));
    p.h.setIdentity();
    p.h.topLeftCorner<3, 3>() = p.m;
    p.h.topRightCorner<3, 1>() = p.t;
    if (std::abs(p.m.determinant()) < 1e-12) {
      throw InvalidInput("estimator chain: singular rotation block");
    }
    const Mat3 mi = p.m.inverse();
    p.h_inv.setIdentity();
    p.h_inv.topLeftCorner<3, 3>() = mi;
    p.h_inv.topRightCorner<3, 1>() = -mi * p.t;
    return p;
  }

  struct Forward {
    Mat4 b = Mat4::Zero();
    std::vector<Mat4> w, c;  // per-m cached products (empty slot at m == n)
  };

  Forward forward(const ChainParams& p, int n, bool cache) const {
    const int count = pose_count();
    Forward f;
    if (cache) {
      f.w.resize(static_cast<size_t>(count));
      f.c.resize(static_cast<size_t>(count));
    }
    for (int m = 0; m < count; ++m) {
      if (m == n) {
        continue;
      }
      Mat4 c4 = Mat4::Identity();
      c4.topLeftCorner<3, 3>() = cam_rot_[static_cast<size_t>(m)];
      c4.topRightCorner<3, 1>() = p.alpha * cam_trans_[static_cast<size_t>(m)];
      const Mat4 w4 =
          p.h_inv * rel_[static_cast<size_t>(n) * count + m] * p.h;
      if (cache) {
        f.w[static_cast<size_t>(m)] = w4;
        f.c[static_cast<size_t>(m)] = c4;
      }
      f.b += w4 * c4;
    }
    f.b /= static_cast<double>(count - 1);
    return f;
  }

  /// Accumulates gradients for pose n given dL/dB_n (bottom row ignored).
  void backward(const ChainParams& p, int n, const Forward& f, Mat4 g_b,
                ChainGrad& acc) const {
    const int count = pose_count();
    g_b /= static_cast<double>(count - 1);
    for (int m = 0; m < count; ++m) {
      if (m == n) {
        continue;
      }
      const Mat4& w4 = f.w[static_cast<size_t>(m)];
      const Mat4& c4 = f.c[static_cast<size_t>(m)];
      const Mat4 g_w = g_b * c4.transpose();
      const Mat4 g_c = w4.transpose() * g_b;
      acc.d_alpha +=
          g_c.topRightCorner<3, 1>().dot(cam_trans_[static_cast<size_t>(m)]);
      const Mat4 ah = rel_[static_cast<size_t>(n) * count + m] * p.h;
      acc.g_h_inv += g_w * ah.transpose();
      acc.g_h +=
          (p.h_inv * rel_[static_cast<size_t>(n) * count + m]).transpose() *
          g_w;
    }
  }

  /// Folds the H^-1 dependency back into H and writes the 13 gradients.
  void finalize(const ChainParams& p, const ChainGrad& acc, VecX& grad) const {
    Mat4 g_h = acc.g_h;
    g_h += -(p.h_inv.transpose() * acc.g_h_inv * p.h_inv.transpose());
    for (int c = 0; c < 3; ++c) {
      grad.segment<3>(3 * c) = g_h.block<3, 1>(0, c);
    }
    grad.segment<3>(9) = g_h.topRightCorner<3, 1>();
    grad(12) = p.alpha * acc.d_alpha;
  }

 private:
  static Mat4 rigid_inverse(const Mat4& m) {
    Mat4 out = Mat4::Identity();
    const Mat3 rt = m.topLeftCorner<3, 3>().transpose();
    out.topLeftCorner<3, 3>() = rt;
    out.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
    return out;
  }

  std::vector<Mat4> rel_;
  std::vector<Mat3> cam_rot_;
  std::vector<Vec3> cam_trans_;
};

}  // namespace graspalign::detail
