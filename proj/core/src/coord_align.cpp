#include <graspalign/coord_align.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <graspalign/detail/adam.hpp>
#include <graspalign/detail/json_util.hpp>
#include <graspalign/detail/lie.hpp>
#include <graspalign/detail/log.hpp>
#include <graspalign/detail/parallel.hpp>
#include <graspalign/detail/rng.hpp>
#include <graspalign/detail/starts.hpp>
#include <graspalign/io.hpp>

namespace graspalign {

namespace {

double median(std::vector<double> values) {
  if (values.empty()) {
    return 0.0;
  }
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

}  // namespace

void AlignmentProblem::validate() const {
  if (ee_poses.size() != cam_obj_poses.size()) {
    throw InvalidInput("AlignmentProblem: pose list size mismatch");
  }
  if (ee_poses.size() < 2) {
    throw InvalidInput("AlignmentProblem: need at least 2 poses");
  }
  dense.validate();
  intrinsics.validate();
  if (render_subsample < 1) {
    throw InvalidInput("AlignmentProblem: render_subsample must be >= 1");
  }
}

Transform3 relative_ee(int n, int m, const std::vector<Transform3>& ee_poses) {
  if (n < 0 || m < 0 || n >= static_cast<int>(ee_poses.size()) ||
      m >= static_cast<int>(ee_poses.size())) {
    throw InvalidInput("relative_ee: pose index out of range");
  }
  return compose(inverse(ee_poses[static_cast<size_t>(n)]),
                 ee_poses[static_cast<size_t>(m)]);
}

Transform3 estimator(int n, const Transform3& H, double alpha,
                     const AlignmentProblem& problem, MeanMode mode) {
  problem.validate();
  const int N = problem.pose_count();
  if (n < 0 || n >= N) {
    throw InvalidInput("estimator: pose index out of range");
  }
  if (!(alpha > 0.0)) {
    throw InvalidInput("estimator: alpha must be positive");
  }
  const Transform3 h_inv = inverse(H);
  std::vector<Transform3> terms;
  terms.reserve(static_cast<size_t>(N) - 1);
  for (int m = 0; m < N; ++m) {
    if (m == n) {
      continue;
    }
    const Transform3 conj =
        compose(compose(h_inv, relative_ee(n, m, problem.ee_poses)), H);
    terms.push_back(compose(
        conj, scaled_pose(problem.cam_obj_poses[static_cast<size_t>(m)],
                          alpha)));
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

  // Lie mode: Karcher mean of the rotations, arithmetic translation mean.
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

MatX2 project_points(const Intrinsics& intrinsics, const MatX3& points) {
  intrinsics.validate();
  MatX2 out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double w = points(i, 2);
    if (!(w > kDepthEpsilon)) {
      throw InvalidInput("project_points: point " + std::to_string(i) +
                         " has depth " + std::to_string(w) +
                         " behind the camera plane");
    }
    out(i, 0) = (intrinsics.fx * points(i, 0) + intrinsics.cx * w) / w;
    out(i, 1) = (intrinsics.fy * points(i, 1) + intrinsics.cy * w) / w;
  }
  return out;
}

CoordObjective::CoordObjective(const AlignmentProblem& problem, int subsample,
                               int threads)
    : intrinsics_(problem.intrinsics), threads_(threads) {
  problem.validate();
  if (subsample < 1) {
    throw InvalidInput("CoordObjective: subsample must be >= 1");
  }
  const int N = problem.pose_count();

  pose_count_ = N;

  // Canonical gauge: re-express the pointmap solution so the first
  // object-to-camera pose is the identity. The loss then depends on the
  // solution's geometry only, never on the arbitrary gauge it arrived in.
  const Transform3 gauge = problem.cam_obj_poses[0].as_transform();
  const Transform3 gauge_inv = inverse(gauge);
  std::vector<Mat3> cam_rot;
  std::vector<Vec3> cam_trans;
  cam_rot.reserve(static_cast<size_t>(N));
  cam_trans.reserve(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) {
    const Transform3 canon = compose(
        problem.cam_obj_poses[static_cast<size_t>(n)].as_transform(),
        gauge_inv);
    cam_rot.push_back(canon.rotation().matrix());
    cam_trans.push_back(canon.translation());
  }
  const DenseCloud canon_dense = apply_points(problem.dense, gauge);

  const Eigen::Index total = canon_dense.points.rows();
  const Eigen::Index kept = (total + subsample - 1) / subsample;
  samples_.resize(kept, 3);
  for (Eigen::Index i = 0, row = 0; i < total; i += subsample, ++row) {
    samples_.row(row) = canon_dense.points.row(i);
  }

  ee_.reserve(static_cast<size_t>(N));
  for (const auto& e : problem.ee_poses) {
    ee_.push_back(e.matrix());
  }
  chain_.emplace(ee_, cam_rot, cam_trans);

  target_.resize(static_cast<Eigen::Index>(N) * kept, 2);
  for (int n = 0; n < N; ++n) {
    MatX3 pts = samples_ * cam_rot[static_cast<size_t>(n)].transpose();
    pts.rowwise() += cam_trans[static_cast<size_t>(n)].transpose();
    for (Eigen::Index i = 0; i < kept; ++i) {
      const double w = pts(i, 2);
      if (!(w > kDepthEpsilon)) {
        throw InvalidInput("coordinate alignment: reconstruction behind the "
                           "camera at pose " +
                           std::to_string(n));
      }
      target_(n * kept + i, 0) =
          (intrinsics_.fx * pts(i, 0) + intrinsics_.cx * w) / w;
      target_(n * kept + i, 1) =
          (intrinsics_.fy * pts(i, 1) + intrinsics_.cy * w) / w;
    }
  }
}

VecX CoordObjective::pack(const Transform3& H, double alpha) const {
  if (!(alpha > 0.0)) {
    throw InvalidInput("CoordObjective::pack: alpha must be positive");
  }
  VecX params(kParamCount);
  const Mat3 r = H.rotation().matrix();
  for (int c = 0; c < 3; ++c) {
    params.segment<3>(3 * c) = r.col(c);
  }
  params.segment<3>(9) = H.translation();
  params(12) = std::log(alpha);
  return params;
}

std::pair<Transform3, double> CoordObjective::unpack(const VecX& params) const {
  Mat3 m;
  for (int c = 0; c < 3; ++c) {
    m.col(c) = params.segment<3>(3 * c);
  }
  return {Transform3(procrustes_project(m), params.segment<3>(9)),
          std::exp(params(12))};
}

void CoordObjective::project_rotation(VecX& params) const {
  Mat3 m;
  for (int c = 0; c < 3; ++c) {
    m.col(c) = params.segment<3>(3 * c);
  }
  const Mat3 projected = procrustes_project(m).matrix();
  for (int c = 0; c < 3; ++c) {
    params.segment<3>(3 * c) = projected.col(c);
  }
}

double CoordObjective::loss(const VecX& params) const {
  return eval(params, nullptr, nullptr);
}

double CoordObjective::loss_and_grad(const VecX& params, VecX& grad) const {
  grad.setZero(kParamCount);
  return eval(params, &grad, nullptr);
}

VecX CoordObjective::per_pose_residuals(const VecX& params) const {
  VecX residuals(pose_count());
  eval(params, nullptr, &residuals);
  return residuals;
}

double CoordObjective::eval(const VecX& params, VecX* grad,
                            VecX* residuals) const {
  const int N = pose_count();
  const Eigen::Index S = samples_.rows();
  const detail::ChainParams p = chain_->parse(params);
  const double pix_weight = 1.0 / (static_cast<double>(N) * S);

  struct Accum {
    double loss = 0.0;
    detail::ChainGrad chain;
    VecX pose_sums;
    std::string error;
  };
  const int chunks = std::max(1, std::min<int>(threads_, std::max(1, N / 2)));
  std::vector<Accum> acc(static_cast<size_t>(chunks));
  for (auto& a : acc) {
    a.pose_sums = VecX::Zero(N);
  }

  auto run = [&](size_t begin, size_t end, size_t chunk) {
    Accum& a = acc[chunk];
    try {
      for (size_t n = begin; n < end; ++n) {
        const auto fwd =
            chain_->forward(p, static_cast<int>(n), grad != nullptr);
        const ProcrustesDerivative proc(fwd.b.topLeftCorner<3, 3>());
        const Mat3 rf = proc.rotation();
        const Vec3 bt = fwd.b.topRightCorner<3, 1>();
        // The estimator translation is metric; the reconstruction is in
        // gauge units. De-scaling by alpha renders both sides of the loss
        // along identical rays.
        const Vec3 tau = bt / p.alpha;

        Mat3 g_rf = Mat3::Zero();
        Vec3 g_tau = Vec3::Zero();
        double pose_sum = 0.0;
        for (Eigen::Index i = 0; i < S; ++i) {
          const Vec3 x = samples_.row(i).transpose();
          const Vec3 v = rf * x + tau;
          const double w = v.z();
          if (!(w > kDepthEpsilon)) {
            throw InvalidInput(
                "coordinate alignment: points behind camera at pose " +
                std::to_string(n));
          }
          const double px = (intrinsics_.fx * v.x() + intrinsics_.cx * w) / w;
          const double py = (intrinsics_.fy * v.y() + intrinsics_.cy * w) / w;
          const double rx =
              px - target_(static_cast<Eigen::Index>(n) * S + i, 0);
          const double ry =
              py - target_(static_cast<Eigen::Index>(n) * S + i, 1);
          const double norm = std::sqrt(rx * rx + ry * ry);
          pose_sum += norm;
          if (grad != nullptr && norm > 1e-12) {
            const double gx = pix_weight * rx / norm;
            const double gy = pix_weight * ry / norm;
            Vec3 gv;
            gv.x() = gx * intrinsics_.fx / w;
            gv.y() = gy * intrinsics_.fy / w;
            gv.z() =
                (gx * (intrinsics_.cx - px) + gy * (intrinsics_.cy - py)) / w;
            g_rf += gv * x.transpose();
            g_tau += gv;
          }
        }
        a.pose_sums(static_cast<Eigen::Index>(n)) = pose_sum;
        a.loss += pose_sum;

        if (grad == nullptr) {
          continue;
        }
        Mat4 g_b = Mat4::Zero();
        g_b.topLeftCorner<3, 3>() = proc.adjoint(g_rf);
        g_b.topRightCorner<3, 1>() = g_tau / p.alpha;
        a.chain.d_alpha += -g_tau.dot(bt) / (p.alpha * p.alpha);
        chain_->backward(p, static_cast<int>(n), fwd, g_b, a.chain);
      }
    } catch (const InvalidInput& e) {
      a.error = e.what();
    }
  };

  detail::parallel_chunks(static_cast<size_t>(N), chunks, run);

  double total = 0.0;
  detail::ChainGrad chain_grad;
  VecX pose_sums = VecX::Zero(N);
  for (const auto& a : acc) {
    if (!a.error.empty()) {
      throw InvalidInput(a.error);
    }
    total += a.loss;
    chain_grad += a.chain;
    pose_sums += a.pose_sums;
  }

  if (grad != nullptr) {
    chain_->finalize(p, chain_grad, *grad);
  }
  if (residuals != nullptr) {
    *residuals = pose_sums / static_cast<double>(S);
  }
  return total * pix_weight;
}

double CoordObjective::alpha_seed() const {
  const int N = pose_count();
  std::vector<double> ee_spread, cam_spread;
  for (int n = 0; n < N; ++n) {
    for (int m = n + 1; m < N; ++m) {
      ee_spread.push_back((ee_[static_cast<size_t>(n)].topRightCorner<3, 1>() -
                           ee_[static_cast<size_t>(m)].topRightCorner<3, 1>())
                              .norm());
      cam_spread.push_back((chain_->cam_trans(n) - chain_->cam_trans(m)).norm());
    }
  }
  const double num = median(ee_spread);
  const double den = median(cam_spread);
  if (num < 1e-12 || den < 1e-12) {
    return 1.0;
  }
  return num / den;
}

double rendered_loss(const Transform3& H, double alpha,
                     const AlignmentProblem& problem) {
  if (!(alpha > 0.0)) {
    throw InvalidInput("rendered_loss: alpha must be positive");
  }
  CoordObjective objective(problem, problem.render_subsample);
  return objective.loss(objective.pack(H, alpha));
}

AlignmentSolution solve_alignment(const AlignmentProblem& problem,
                                  const SolverOptions& opts) {
  problem.validate();
  CoordObjective objective(problem, problem.render_subsample, opts.threads);

  const double alpha0 =
      opts.init_alpha.value_or(std::max(objective.alpha_seed(), 1e-6));

  VecX lr_scale(CoordObjective::kParamCount);
  lr_scale.head<12>().setConstant(opts.lr_pose);
  lr_scale(12) = opts.lr_log_alpha;

  bool any_valid = false;
  double best_loss = std::numeric_limits<double>::infinity();
  VecX best_params;

  const int n_starts = std::max(1, opts.n_starts);
  for (int start = 0; start < n_starts; ++start) {
    if (best_loss < opts.early_stop_loss_px) {
      break;  // an earlier start already fits to numerical precision
    }
    const Transform3 h0(detail::start_rotation(start, opts.seed),
                        Vec3::Zero());
    VecX params = objective.pack(h0, alpha0);

    double loss_cur;
    try {
      loss_cur = objective.loss(params);
    } catch (const InvalidInput&) {
      GA_LOG_DEBUG("solve_alignment: start " << start
                                             << " invalid at initialization");
      continue;
    }
    if (loss_cur < best_loss) {
      best_loss = loss_cur;
      best_params = params;
      any_valid = true;
    }

    detail::Adam adam(CoordObjective::kParamCount, lr_scale);
    VecX grad(CoordObjective::kParamCount);
    double damp = 1.0;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
      objective.loss_and_grad(params, grad);
      const double lr =
          detail::cosine_decay(1.0, iter, opts.max_iters) * damp;
      const auto snapshot = adam.save();
      VecX candidate = params;
      adam.step(candidate, grad, lr);
      objective.project_rotation(candidate);
      double loss_new;
      try {
        loss_new = objective.loss(candidate);
      } catch (const InvalidInput&) {
        adam.restore(snapshot);
        damp *= 0.5;
        if (damp < 1e-8) {
          break;
        }
        continue;
      }
      params = std::move(candidate);
      loss_cur = loss_new;
      if (loss_cur < best_loss) {
        best_loss = loss_cur;
        best_params = params;
        any_valid = true;
      }
      if (loss_cur > opts.divergence_guard_px ||
          loss_cur < opts.early_stop_loss_px) {
        break;
      }
    }
    GA_LOG_DEBUG("solve_alignment: start " << start << " best loss so far "
                                           << best_loss);
  }

  if (!any_valid) {
    throw Divergence(
        "solve_alignment: no start produced a valid iterate; re-initialize "
        "with different starts or seed");
  }
  if (best_loss > opts.divergence_guard_px) {
    throw Divergence("solve_alignment: diverged (loss " +
                     std::to_string(best_loss) +
                     " px); re-initialize with different starts or seed");
  }

  AlignmentSolution solution;
  std::tie(solution.H, solution.alpha) = objective.unpack(best_params);

  // Final metrics are reported without subsampling.
  CoordObjective full(problem, 1, opts.threads);
  const VecX full_params = full.pack(solution.H, solution.alpha);
  solution.final_loss = full.loss(full_params);
  solution.per_pose_residuals = full.per_pose_residuals(full_params);
  solution.cam_base =
      camera_base(solution, problem, &solution.cam_base_spread);
  GA_LOG_INFO("solve_alignment: final loss " << solution.final_loss
                                             << " px, alpha "
                                             << solution.alpha);
  return solution;
}

Transform3 camera_base(const AlignmentSolution& solution,
                       const AlignmentProblem& problem, double* spread) {
  problem.validate();
  const int N = problem.pose_count();
  std::vector<Transform3> products;
  products.reserve(static_cast<size_t>(N));
  Mat4 sum = Mat4::Zero();
  for (int n = 0; n < N; ++n) {
    const Transform3 p = compose(
        compose(problem.ee_poses[static_cast<size_t>(n)], solution.H),
        scaled_pose(problem.cam_obj_poses[static_cast<size_t>(n)],
                    solution.alpha));
    products.push_back(p);
    sum += p.matrix();
  }
  sum /= static_cast<double>(N);
  const Transform3 mean(procrustes_project(sum.topLeftCorner<3, 3>()),
                        sum.topRightCorner<3, 1>());
  if (spread != nullptr) {
    double s = 0.0;
    for (const auto& p : products) {
      s += se3_distance(p, mean, 1.0);
    }
    *spread = s / static_cast<double>(N);
  }
  return mean;
}

AlignmentProblem regauge(const AlignmentProblem& problem, const Transform3& g) {
  AlignmentProblem out = problem;
  out.dense = apply_points(problem.dense, g);
  const Transform3 g_inv = inverse(g);
  for (auto& pose : out.cam_obj_poses) {
    const Transform3 moved = compose(pose.as_transform(), g_inv);
    pose = CameraObjectPose{moved.rotation(), moved.translation()};
  }
  return out;
}

AlignmentProblem load_problem(const std::filesystem::path& path) {
  const auto j = detail::parse_json_file(path, "load_problem");
  for (const char* key : {"ee_poses", "cam_obj_poses", "dense_ply",
                          "intrinsics"}) {
    if (!j.contains(key)) {
      throw InvalidInput("load_problem: missing key \"" + std::string(key) +
                         "\" in " + path.string());
    }
  }
  AlignmentProblem problem;
  for (const auto& m : j["ee_poses"]) {
    problem.ee_poses.push_back(detail::matrix_from_json(m, "ee_poses"));
  }
  for (const auto& m : j["cam_obj_poses"]) {
    const Transform3 t = detail::matrix_from_json(m, "cam_obj_poses");
    problem.cam_obj_poses.push_back(
        CameraObjectPose{t.rotation(), t.translation()});
  }
  const std::filesystem::path ply(j["dense_ply"].get<std::string>());
  problem.dense =
      read_ply(ply.is_absolute() ? ply : path.parent_path() / ply);
  problem.intrinsics = detail::intrinsics_from_json(j["intrinsics"],
                                                    "load_problem");
  if (j.contains("render_subsample")) {
    problem.render_subsample = j["render_subsample"].get<int>();
  }
  problem.validate();
  return problem;
}

void save_problem(const std::filesystem::path& path,
                  const AlignmentProblem& problem,
                  const std::string& dense_ply_name) {
  problem.validate();
  nlohmann::json j;
  j["ee_poses"] = nlohmann::json::array();
  for (const auto& e : problem.ee_poses) {
    j["ee_poses"].push_back(detail::matrix_json(e));
  }
  j["cam_obj_poses"] = nlohmann::json::array();
  for (const auto& c : problem.cam_obj_poses) {
    j["cam_obj_poses"].push_back(detail::matrix_json(c.as_transform()));
  }
  j["dense_ply"] = dense_ply_name;
  j["intrinsics"] = detail::intrinsics_json(problem.intrinsics);
  j["render_subsample"] = problem.render_subsample;
  write_ply(path.parent_path() / dense_ply_name, problem.dense);
  std::ofstream out(path);
  if (!out.good()) {
    throw InvalidInput("save_problem: cannot open " + path.string());
  }
  out << j.dump(2) << "\n";
  if (!out.good()) {
    throw InvalidInput("save_problem: write failed");
  }
}

AlignmentSolution load_solution(const std::filesystem::path& path) {
  const auto j = detail::parse_json_file(path, "load_solution");
  for (const char* key : {"H", "alpha", "final_loss_px", "residuals_px"}) {
    if (!j.contains(key)) {
      throw InvalidInput("load_solution: missing key \"" + std::string(key) +
                         "\" in " + path.string());
    }
  }
  AlignmentSolution s;
  s.H = detail::matrix_from_json(j["H"], "solution H");
  s.alpha = j["alpha"].get<double>();
  if (!(s.alpha > 0.0)) {
    throw InvalidInput("load_solution: alpha must be positive");
  }
  s.final_loss = j["final_loss_px"].get<double>();
  const auto& res = j["residuals_px"];
  s.per_pose_residuals.resize(static_cast<Eigen::Index>(res.size()));
  for (Eigen::Index i = 0; i < s.per_pose_residuals.size(); ++i) {
    s.per_pose_residuals(i) = res[static_cast<size_t>(i)].get<double>();
  }
  if (j.contains("cam_base")) {
    s.cam_base = detail::matrix_from_json(j["cam_base"], "cam_base");
  }
  if (j.contains("cam_base_spread")) {
    s.cam_base_spread = j["cam_base_spread"].get<double>();
  }
  return s;
}

void save_solution(const std::filesystem::path& path,
                   const AlignmentSolution& solution,
                   const std::string& method) {
  nlohmann::json j;
  if (!method.empty()) {
    j["method"] = method;
  }
  j["H"] = detail::matrix_json(solution.H);
  j["alpha"] = solution.alpha;
  j["final_loss_px"] = solution.final_loss;
  j["residuals_px"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < solution.per_pose_residuals.size(); ++i) {
    j["residuals_px"].push_back(solution.per_pose_residuals(i));
  }
  j["cam_base"] = detail::matrix_json(solution.cam_base);
  j["cam_base_spread"] = solution.cam_base_spread;
  std::ofstream out(path);
  if (!out.good()) {
    throw InvalidInput("save_solution: cannot open " + path.string());
  }
  out << j.dump(2) << "\n";
  if (!out.good()) {
    throw InvalidInput("save_solution: write failed");
  }
}

}  // namespace graspalign
