#pragma once

#include <Eigen/Core>

#include <cmath>

namespace graspalign::detail {

// Plain Adam with bias correction and a per-component learning-rate
// multiplier. The caller owns the parameter vector and step schedule.
class Adam {
 public:
  Adam(Eigen::Index n, const Eigen::VectorXd& lr_scale)
      : m_(Eigen::VectorXd::Zero(n)),
        v_(Eigen::VectorXd::Zero(n)),
        lr_scale_(lr_scale) {}

  explicit Adam(Eigen::Index n) : Adam(n, Eigen::VectorXd::Ones(n)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    params.array() -= lr * lr_scale_.array() * (m_.array() / bc1) /
                      ((v_.array() / bc2).sqrt() + eps_);
  }

  // Restores the state captured before a rejected step.
  struct Snapshot {
    Eigen::VectorXd m, v;
    int t = 0;
  };
  Snapshot save() const { return Snapshot{m_, v_, t_}; }
  void restore(const Snapshot& s) {
    m_ = s.m;
    v_ = s.v;
    t_ = s.t;
  }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  Eigen::VectorXd m_, v_, lr_scale_;
};

inline double cosine_decay(double base_lr, int iter, int max_iters) {
  if (max_iters <= 1) {
    return base_lr;
  }
  const double x = static_cast<double>(iter) / (max_iters - 1);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * x));
}

}  // namespace graspalign::detail
