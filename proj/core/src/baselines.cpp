#include <graspalign/baselines.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <graspalign/detail/adam.hpp>
#include <graspalign/detail/estimator_chain.hpp>
#include <graspalign/detail/json_util.hpp>
#include <graspalign/detail/log.hpp>
#include <graspalign/detail/rng.hpp>
#include <graspalign/detail/starts.hpp>

namespace graspalign {

namespace {

constexpr int kLayerSizes[4] = {12, 64, 64, 12};

// d(theta)/d(R_f) for theta = geodesic(R_f, R_target); the sin guard keeps
// the subgradient bounded at coincident rotations.
Mat3 geodesic_grad(const Mat3& rf, const Mat3& target, double* theta_out) {
  const double tr = (target.transpose() * rf).trace();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(c);
  *theta_out = theta;
  const double s = std::max(std::sin(theta), 1e-7);
  return -target / (2.0 * s);
}

// Mean SE(3) distance between the estimator and the per-pose camera-object
// poses, over the raw 13 parameters.
class Se3Objective {
 public:
  Se3Objective(const AlignmentProblem& problem, double rot_weight)
      : rot_weight_(rot_weight) {
    problem.validate();
    std::vector<Mat4> ee;
    std::vector<Mat3> rot;
    std::vector<Vec3> trans;
    for (const auto& e : problem.ee_poses) {
      ee.push_back(e.matrix());
    }
    for (const auto& c : problem.cam_obj_poses) {
      rot.push_back(c.rotation.matrix());
      trans.push_back(c.translation);
    }
    chain_.emplace(ee, rot, trans);
  }

  int pose_count() const { return chain_->pose_count(); }

  double loss_and_grad(const VecX& params, VecX* grad) const {
    const int n_poses = chain_->pose_count();
    const detail::ChainParams p = chain_->parse(params);
    double total = 0.0;
    detail::ChainGrad acc;
    for (int n = 0; n < n_poses; ++n) {
      const auto fwd = chain_->forward(p, n, grad != nullptr);
      const ProcrustesDerivative proc(fwd.b.topLeftCorner<3, 3>());
      const Mat3 rf = proc.rotation();
      const Vec3 tf = fwd.b.topRightCorner<3, 1>();
      const Mat3& r_tgt = chain_->cam_rot(n);
      const Vec3 t_tgt = p.alpha * chain_->cam_trans(n);

      double theta = 0.0;
      const Mat3 dtheta = geodesic_grad(rf, r_tgt, &theta);
      const Vec3 dt = tf - t_tgt;
      const double dist = dt.norm();
      total += rot_weight_ * theta + dist;

      if (grad == nullptr) {
        continue;
      }
      const double w = 1.0 / n_poses;
      Mat4 g_b = Mat4::Zero();
      g_b.topLeftCorner<3, 3>() = proc.adjoint(w * rot_weight_ * dtheta);
      if (dist > 0.0) {
        const Vec3 g_t = (w / dist) * dt;
        g_b.topRightCorner<3, 1>() = g_t;
        // Target translation alpha * t_n also depends on alpha.
        acc.d_alpha += -g_t.dot(chain_->cam_trans(n));
      }
      chain_->backward(p, n, fwd, g_b, acc);
    }
    if (grad != nullptr) {
      chain_->finalize(p, acc, *grad);
    }
    return total / n_poses;
  }

  VecX pack(const Transform3& h, double alpha) const {
    VecX params(13);
    const Mat3 r = h.rotation().matrix();
    for (int c = 0; c < 3; ++c) {
      params.segment<3>(3 * c) = r.col(c);
    }
    params.segment<3>(9) = h.translation();
    params(12) = std::log(alpha);
    return params;
  }

  void project_rotation(VecX& params) const {
    Mat3 m;
    for (int c = 0; c < 3; ++c) {
      m.col(c) = params.segment<3>(3 * c);
    }
    const Mat3 projected = procrustes_project(m).matrix();
    for (int c = 0; c < 3; ++c) {
      params.segment<3>(3 * c) = projected.col(c);
    }
  }

 private:
  std::optional<detail::EstimatorChain> chain_;
  double rot_weight_ = 1.0;
};


VecX encode_pose(const Transform3& pose) {
  VecX x(12);
  const Mat3 r = pose.rotation().matrix();
  for (int c = 0; c < 3; ++c) {
    x.segment<3>(3 * c) = r.col(c);
  }
  x.segment<3>(9) = pose.translation();
  return x;
}

struct ForwardPass {
  VecX x, a1, h1, a2, h2, out;
};

ForwardPass regressor_forward(const RegressorParams& p, const VecX& x) {
  ForwardPass f;
  f.x = x;
  f.a1 = p.weights[0] * x + p.biases[0];
  f.h1 = f.a1.array().tanh();
  f.a2 = p.weights[1] * f.h1 + p.biases[1];
  f.h2 = f.a2.array().tanh();
  f.out = p.weights[2] * f.h2 + p.biases[2];
  return f;
}

Eigen::Index regressor_param_count(const RegressorParams& p) {
  Eigen::Index n = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    n += p.weights[l].size() + p.biases[l].size();
  }
  return n;
}

VecX regressor_pack(const RegressorParams& p) {
  VecX flat(regressor_param_count(p));
  Eigen::Index off = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    flat.segment(off, p.weights[l].size()) =
        Eigen::Map<const VecX>(p.weights[l].data(), p.weights[l].size());
    off += p.weights[l].size();
    flat.segment(off, p.biases[l].size()) = p.biases[l];
    off += p.biases[l].size();
  }
  return flat;
}

RegressorParams regressor_unpack(const VecX& flat) {
  RegressorParams p;
  Eigen::Index off = 0;
  for (int l = 0; l < 3; ++l) {
    const int rows = kLayerSizes[l + 1];
    const int cols = kLayerSizes[l];
    Eigen::MatrixXd w(rows, cols);
    Eigen::Map<VecX>(w.data(), w.size()) = flat.segment(off, w.size());
    off += w.size();
    p.weights.push_back(w);
    p.biases.push_back(flat.segment(off, rows));
    off += rows;
  }
  return p;
}

}  // namespace

AlignmentSolution solve_no_render(const AlignmentProblem& problem,
                                  const SolverOptions& opts,
                                  double rot_weight) {
  if (!(rot_weight > 0.0)) {
    throw InvalidInput("solve_no_render: rot_weight must be positive");
  }
  const Se3Objective objective(problem, rot_weight);
  CoordObjective seed_helper(problem, problem.render_subsample, 1);
  const double alpha0 =
      opts.init_alpha.value_or(std::max(seed_helper.alpha_seed(), 1e-6));

  VecX lr_scale(13);
  lr_scale.head<12>().setConstant(opts.lr_pose);
  lr_scale(12) = opts.lr_log_alpha;

  double best_loss = std::numeric_limits<double>::infinity();
  VecX best_params;
  const int n_starts = std::max(1, opts.n_starts);
  for (int start = 0; start < n_starts; ++start) {
    if (best_loss < opts.early_stop_loss_px) {
      break;
    }
    const Transform3 h0(detail::start_rotation(start, opts.seed),
                        Vec3::Zero());
    VecX params = objective.pack(h0, alpha0);
    double loss_cur = objective.loss_and_grad(params, nullptr);
    if (loss_cur < best_loss) {
      best_loss = loss_cur;
      best_params = params;
    }
    detail::Adam adam(13, lr_scale);
    VecX grad(13);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
      objective.loss_and_grad(params, &grad);
      adam.step(params, grad, detail::cosine_decay(1.0, iter, opts.max_iters));
      objective.project_rotation(params);
      loss_cur = objective.loss_and_grad(params, nullptr);
      if (loss_cur < best_loss) {
        best_loss = loss_cur;
        best_params = params;
      }
    }
  }
  if (!std::isfinite(best_loss)) {
    throw Divergence("solve_no_render: optimization produced no finite loss");
  }

  AlignmentSolution solution;
  CoordObjective full(problem, 1, opts.threads);
  std::tie(solution.H, solution.alpha) = full.unpack(best_params);
  try {
    const VecX full_params = full.pack(solution.H, solution.alpha);
    solution.final_loss = full.loss(full_params);
    solution.per_pose_residuals = full.per_pose_residuals(full_params);
  } catch (const InvalidInput&) {
    GA_LOG_INFO("solve_no_render: recovered transform does not render; "
                "reporting the pose-space objective instead");
    solution.final_loss = best_loss;
    solution.per_pose_residuals = VecX::Zero(problem.pose_count());
  }
  solution.cam_base =
      camera_base(solution, problem, &solution.cam_base_spread);
  return solution;
}

void RegressorParams::validate() const {
  if (weights.size() != 3 || biases.size() != 3) {
    throw InvalidInput("RegressorParams: expected 3 layers");
  }
  for (int l = 0; l < 3; ++l) {
    const auto& w = weights[static_cast<size_t>(l)];
    const auto& b = biases[static_cast<size_t>(l)];
    if (w.rows() != kLayerSizes[l + 1] || w.cols() != kLayerSizes[l] ||
        b.size() != kLayerSizes[l + 1]) {
      throw InvalidInput("RegressorParams: layer " + std::to_string(l) +
                         " has wrong shape");
    }
    if (!w.allFinite() || !b.allFinite()) {
      throw InvalidInput("RegressorParams: non-finite parameters");
    }
  }
}

RegressorParams RegressorParams::initialize(uint64_t seed) {
  auto rng = detail::Rng::stream(seed, 0x6e65740ull);
  RegressorParams p;
  for (int l = 0; l < 3; ++l) {
    const int rows = kLayerSizes[l + 1];
    const int cols = kLayerSizes[l];
    const double bound = std::sqrt(6.0 / (rows + cols));
    Eigen::MatrixXd w(rows, cols);
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r < rows; ++r) {
        w(r, c) = rng.uniform(-bound, bound);
      }
    }
    p.weights.push_back(w);
    p.biases.push_back(VecX::Zero(rows));
  }
  return p;
}

RegressorParams train_direct(
    const std::vector<Transform3>& ee_poses,
    const std::vector<CameraObjectPose>& cam_obj_poses,
    const RegressorOptions& opts, std::vector<double>* loss_trace) {
  if (ee_poses.empty() || ee_poses.size() != cam_obj_poses.size()) {
    throw InvalidInput("train_direct: need matching, nonempty pose lists");
  }
  const size_t count = ee_poses.size();
  std::vector<VecX> inputs;
  inputs.reserve(count);
  for (const auto& e : ee_poses) {
    inputs.push_back(encode_pose(e));
  }

  auto loss_and_grad = [&](const RegressorParams& p,
                           RegressorParams* grad) -> double {
    double total = 0.0;
    for (size_t s = 0; s < count; ++s) {
      const ForwardPass f = regressor_forward(p, inputs[s]);
      Mat3 m_out;
      for (int c = 0; c < 3; ++c) {
        m_out.col(c) = f.out.segment<3>(3 * c);
      }
      const Vec3 t_out = f.out.segment<3>(9);
      const ProcrustesDerivative proc(m_out);
      const Mat3& r_tgt = cam_obj_poses[s].rotation.matrix();
      const Vec3& t_tgt = cam_obj_poses[s].translation;

      double theta = 0.0;
      const Mat3 dtheta = geodesic_grad(proc.rotation(), r_tgt, &theta);
      const Vec3 dt = t_out - t_tgt;
      const double dist = dt.norm();
      total += opts.rot_weight * theta + dist;

      if (grad == nullptr) {
        continue;
      }
      const double w = 1.0 / static_cast<double>(count);
      VecX g_out = VecX::Zero(12);
      const Mat3 g_m = proc.adjoint(w * opts.rot_weight * dtheta);
      for (int c = 0; c < 3; ++c) {
        g_out.segment<3>(3 * c) = g_m.col(c);
      }
      if (dist > 0.0) {
        g_out.segment<3>(9) = (w / dist) * dt;
      }
      // Backprop through the two tanh layers.
      const VecX g_h2 = p.weights[2].transpose() * g_out;
      const VecX g_a2 =
          g_h2.array() * (1.0 - f.h2.array() * f.h2.array());
      const VecX g_h1 = p.weights[1].transpose() * g_a2;
      const VecX g_a1 =
          g_h1.array() * (1.0 - f.h1.array() * f.h1.array());
      grad->weights[2] += g_out * f.h2.transpose();
      grad->biases[2] += g_out;
      grad->weights[1] += g_a2 * f.h1.transpose();
      grad->biases[1] += g_a2;
      grad->weights[0] += g_a1 * f.x.transpose();
      grad->biases[0] += g_a1;
    }
    return total / static_cast<double>(count);
  };

  RegressorParams params = RegressorParams::initialize(opts.seed);
  VecX flat = regressor_pack(params);
  detail::Adam adam(flat.size());
  double best_loss = loss_and_grad(params, nullptr);
  RegressorParams best = params;
  if (loss_trace != nullptr) {
    loss_trace->push_back(best_loss);
  }
  // Free-running Adam; a step is accepted (and recorded) when it improves
  // on the best loss seen, and the best parameters are returned.
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    RegressorParams grad = params;
    for (auto& w : grad.weights) {
      w.setZero();
    }
    for (auto& b : grad.biases) {
      b.setZero();
    }
    loss_and_grad(params, &grad);
    adam.step(flat, regressor_pack(grad),
              detail::cosine_decay(opts.lr, iter, opts.max_iters));
    params = regressor_unpack(flat);
    const double loss_new = loss_and_grad(params, nullptr);
    if (loss_new < best_loss) {
      best_loss = loss_new;
      best = params;
      if (loss_trace != nullptr) {
        loss_trace->push_back(best_loss);
      }
    }
  }
  GA_LOG_INFO("train_direct: best training loss " << best_loss);
  return best;
}

Transform3 predict_direct(const RegressorParams& params,
                          const Transform3& ee_pose) {
  params.validate();
  const ForwardPass f = regressor_forward(params, encode_pose(ee_pose));
  Mat3 m_out;
  for (int c = 0; c < 3; ++c) {
    m_out.col(c) = f.out.segment<3>(3 * c);
  }
  return Transform3(procrustes_project(m_out), f.out.segment<3>(9));
}

void save_regressor(const std::filesystem::path& path,
                    const RegressorParams& params) {
  params.validate();
  nlohmann::json j = nlohmann::json::array();
  for (size_t l = 0; l < params.weights.size(); ++l) {
    nlohmann::json layer;
    layer["weights"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < params.weights[l].rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < params.weights[l].cols(); ++c) {
        row.push_back(params.weights[l](r, c));
      }
      layer["weights"].push_back(row);
    }
    layer["bias"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
      layer["bias"].push_back(params.biases[l](i));
    }
    j.push_back(layer);
  }
  std::ofstream out(path);
  if (!out.good()) {
    throw InvalidInput("save_regressor: cannot open " + path.string());
  }
  out << j.dump(2) << "\n";
}

RegressorParams load_regressor(const std::filesystem::path& path) {
  const auto j = detail::parse_json_file(path, "load_regressor");
  if (!j.is_array() || j.size() != 3) {
    throw InvalidInput("load_regressor: expected 3 layers");
  }
  RegressorParams p;
  for (const auto& layer : j) {
    const auto& w = layer.at("weights");
    const auto rows = w.size();
    const auto cols = w.at(0).size();
    Eigen::MatrixXd wm(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        wm(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            w[r][c].get<double>();
      }
    }
    p.weights.push_back(wm);
    const auto& b = layer.at("bias");
    VecX bv(static_cast<Eigen::Index>(b.size()));
    for (size_t i = 0; i < b.size(); ++i) {
      bv(static_cast<Eigen::Index>(i)) = b[i].get<double>();
    }
    p.biases.push_back(bv);
  }
  p.validate();
  return p;
}

}  // namespace graspalign
