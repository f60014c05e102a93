#include <graspalign/synth.hpp>

#include <algorithm>
#include <cmath>

#include <graspalign/detail/chain_json.hpp>
#include <graspalign/detail/json_util.hpp>
#include <graspalign/detail/lie.hpp>
#include <graspalign/detail/log.hpp>
#include <graspalign/detail/rng.hpp>
#include <graspalign/io.hpp>

namespace graspalign {

namespace {

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_cloud(DenseCloud& cloud) {
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      cloud.points(i, c) = f32(cloud.points(i, c));
    }
  }
  if (cloud.confidence) {
    for (Eigen::Index i = 0; i < cloud.confidence->size(); ++i) {
      (*cloud.confidence)(i) = f32((*cloud.confidence)(i));
    }
  }
}

// Even grids over parametric surfaces. All sampling is a pure function of
// the shape parameters, so clouds are reproducible byte for byte.
void sample_box(const Vec3& center, const Vec3& size, int target,
                std::vector<Vec3>& out) {
  const Vec3 h = size / 2.0;
  const double face_areas[3] = {size.y() * size.z(), size.x() * size.z(),
                                size.x() * size.y()};
  const double total_area = 2.0 * (face_areas[0] + face_areas[1] + face_areas[2]);
  for (int axis = 0; axis < 3; ++axis) {
    const int per_face = std::max(
        4, static_cast<int>(target * face_areas[axis] / total_area));
    const int n1 = std::max(2, static_cast<int>(std::lround(
                                   std::sqrt(static_cast<double>(per_face)))));
    const int n2 = std::max(2, per_face / n1);
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    for (int side = -1; side <= 1; side += 2) {
      for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
          Vec3 p = center;
          p(axis) += side * h(axis);
          p(u_axis) += -h(u_axis) + 2.0 * h(u_axis) * i / (n1 - 1);
          p(v_axis) += -h(v_axis) + 2.0 * h(v_axis) * j / (n2 - 1);
          out.push_back(p);
        }
      }
    }
  }
}

void sample_sphere(const Vec3& center, double radius, int target,
                   std::vector<Vec3>& out) {
  const int n_theta = std::max(
      8, static_cast<int>(std::lround(std::sqrt(target * 2.0))));
  const int n_phi = std::max(4, target / n_theta);
  for (int i = 0; i < n_phi; ++i) {
    const double phi = M_PI * (i + 0.5) / n_phi;
    for (int j = 0; j < n_theta; ++j) {
      const double theta = 2.0 * M_PI * j / n_theta;
      out.push_back(center + radius * Vec3(std::sin(phi) * std::cos(theta),
                                           std::sin(phi) * std::sin(theta),
                                           std::cos(phi)));
    }
  }
}

void sample_torus(const Vec3& center, double major, double minor,
                  double arc_begin, double arc_end, int target,
                  std::vector<Vec3>& out) {
  const int n_major = std::max(
      8, static_cast<int>(std::lround(std::sqrt(target * 4.0))));
  const int n_minor = std::max(4, target / n_major);
  for (int i = 0; i < n_major; ++i) {
    const double theta =
        arc_begin + (arc_end - arc_begin) * i / (n_major - 1);
    for (int j = 0; j < n_minor; ++j) {
      const double phi = 2.0 * M_PI * j / n_minor;
      const double ring = major + minor * std::cos(phi);
      out.push_back(center + Vec3(ring * std::cos(theta),
                                  ring * std::sin(theta),
                                  minor * std::sin(phi)));
    }
  }
}

void sample_cylinder(const Vec3& base, const Vec3& axis_dir, double radius,
                     double length, int target, std::vector<Vec3>& out) {
  const Vec3 d = axis_dir.normalized();
  Vec3 u = d.cross(Vec3::UnitZ());
  if (u.norm() < 1e-6) {
    u = d.cross(Vec3::UnitX());
  }
  u.normalize();
  const Vec3 v = d.cross(u);
  const int n_len = std::max(
      4, static_cast<int>(std::lround(std::sqrt(target / 2.0))));
  const int n_ang = std::max(6, target / n_len);
  for (int i = 0; i < n_len; ++i) {
    const double t = length * i / (n_len - 1);
    for (int j = 0; j < n_ang; ++j) {
      const double a = 2.0 * M_PI * j / n_ang;
      out.push_back(base + t * d +
                    radius * (std::cos(a) * u + std::sin(a) * v));
    }
  }
}

std::vector<double> params_or_default(ObjectKind kind,
                                      const std::vector<double>& values) {
  if (!values.empty()) {
    return values;
  }
  switch (kind) {
    case ObjectKind::kHammer:
      return {0.24, 0.025, 0.11, 0.035};
    case ObjectKind::kBlock:
      return {0.10, 0.10, 0.10};
    case ObjectKind::kTape:
      return {0.05, 0.012};
    case ObjectKind::kTeapot:
      return {0.07, 0.10};
    case ObjectKind::kCustom:
      throw InvalidInput("make_object: custom kind requires box parameters");
  }
  throw InvalidInput("make_object: unknown kind");
}

Vec3 teapot_spout_dir() {
  return Vec3(std::cos(M_PI / 6.0), 0.0, std::sin(M_PI / 6.0));
}

struct Visibility {
  bool ok = false;
  double min_depth = 0.0;
  double in_frame_fraction = 0.0;
  double mean_depth = 0.0;
};

Visibility check_visibility(const MatX3& object_metric,
                            const Transform3& cam_from_object,
                            const Intrinsics& k, int width, int height,
                            double min_in_frame) {
  Visibility vis;
  const MatX3 pts = transform_points(object_metric, cam_from_object);
  vis.min_depth = pts.col(2).minCoeff();
  vis.mean_depth = pts.col(2).mean();
  if (vis.min_depth <= 0.05) {
    return vis;
  }
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double w = pts(i, 2);
    const double u = (k.fx * pts(i, 0) + k.cx * w) / w;
    const double v = (k.fy * pts(i, 1) + k.cy * w) / w;
    if (u >= 0.0 && v >= 0.0 && u < width && v < height) {
      ++inside;
    }
  }
  vis.in_frame_fraction =
      static_cast<double>(inside) / static_cast<double>(pts.rows());
  vis.ok = vis.in_frame_fraction >= min_in_frame;
  return vis;
}

MatX3 subsample_rows(const MatX3& m, int stride) {
  const Eigen::Index kept = (m.rows() + stride - 1) / stride;
  MatX3 out(kept, 3);
  for (Eigen::Index i = 0, r = 0; i < m.rows(); i += stride, ++r) {
    out.row(r) = m.row(i);
  }
  return out;
}

}  // namespace

void NoiseSpec::validate() const {
  if (point_sigma < 0.0 || pose_rot_sigma < 0.0 || pose_trans_sigma < 0.0) {
    throw InvalidInput("NoiseSpec: sigmas must be nonnegative");
  }
}

ObjectKind object_kind_from_string(const std::string& name) {
  if (name == "hammer") return ObjectKind::kHammer;
  if (name == "block") return ObjectKind::kBlock;
  if (name == "tape") return ObjectKind::kTape;
  if (name == "teapot") return ObjectKind::kTeapot;
  if (name == "custom") return ObjectKind::kCustom;
  throw InvalidInput("unknown object kind: " + name);
}

std::string to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::kHammer: return "hammer";
    case ObjectKind::kBlock: return "block";
    case ObjectKind::kTape: return "tape";
    case ObjectKind::kTeapot: return "teapot";
    case ObjectKind::kCustom: return "custom";
  }
  return "unknown";
}

DenseCloud make_object(ObjectKind kind, const ObjectParams& params) {
  if (params.target_points < 2000 || params.target_points > 20000) {
    throw InvalidInput("make_object: target_points must be in [2000, 20000]");
  }
  const std::vector<double> p = params_or_default(kind, params.values);
  for (double v : p) {
    if (!std::isfinite(v)) {
      throw InvalidInput("make_object: non-finite parameter");
    }
  }
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(params.target_points) + 512);
  switch (kind) {
    case ObjectKind::kHammer: {
      if (p.size() != 4 || p[0] <= 0 || p[1] <= 0 || p[2] <= 0 || p[3] <= 0) {
        throw InvalidInput("make_object: hammer expects 4 positive values");
      }
      const double handle_len = p[0], handle_w = p[1];
      const double head_len = p[2], head_w = p[3];
      sample_box(Vec3(0, 0, handle_len / 2.0),
                 Vec3(handle_w, handle_w, handle_len),
                 params.target_points * 2 / 3, pts);
      sample_box(Vec3(0, 0, handle_len + head_w / 2.0),
                 Vec3(head_len, head_w, head_w), params.target_points / 3,
                 pts);
      break;
    }
    case ObjectKind::kBlock: {
      if (p.size() != 3 || p[0] <= 0 || p[1] <= 0 || p[2] <= 0) {
        throw InvalidInput("make_object: block expects 3 positive extents");
      }
      sample_box(Vec3::Zero(), Vec3(p[0], p[1], p[2]), params.target_points,
                 pts);
      break;
    }
    case ObjectKind::kTape: {
      if (p.size() != 2 || p[0] <= 0 || p[1] <= 0 || p[1] >= p[0]) {
        throw InvalidInput(
            "make_object: tape expects {major_radius, minor_radius} with "
            "minor < major");
      }
      sample_torus(Vec3::Zero(), p[0], p[1], 0.0, 2.0 * M_PI,
                   params.target_points, pts);
      break;
    }
    case ObjectKind::kTeapot: {
      if (p.size() != 2 || p[0] <= 0 || p[1] <= 0) {
        throw InvalidInput(
            "make_object: teapot expects {body_radius, spout_length}");
      }
      const double body_r = p[0], spout_len = p[1];
      sample_sphere(Vec3::Zero(), body_r, params.target_points * 3 / 5, pts);
      sample_cylinder(body_r * teapot_spout_dir(), teapot_spout_dir(), 0.012,
                      spout_len, params.target_points / 5, pts);
      // Handle: half torus on the opposite side, in the xz plane.
      {
        std::vector<Vec3> arc;
        sample_torus(Vec3::Zero(), body_r + 0.025, 0.008, M_PI * 0.6,
                     M_PI * 1.4, params.target_points / 5, arc);
        for (auto& q : arc) {
          pts.push_back(Vec3(q.x(), q.z(), q.y()));  // swing arc into xz
        }
      }
      break;
    }
    case ObjectKind::kCustom: {
      if (p.empty() || p.size() % 6 != 0) {
        throw InvalidInput(
            "make_object: custom expects box sextuples {cx,cy,cz,sx,sy,sz}");
      }
      const int boxes = static_cast<int>(p.size() / 6);
      for (int b = 0; b < boxes; ++b) {
        const Vec3 c(p[b * 6 + 0], p[b * 6 + 1], p[b * 6 + 2]);
        const Vec3 s(p[b * 6 + 3], p[b * 6 + 4], p[b * 6 + 5]);
        if (s.minCoeff() <= 0) {
          throw InvalidInput("make_object: custom box sizes must be positive");
        }
        sample_box(c, s, params.target_points / boxes, pts);
      }
      break;
    }
  }
  DenseCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) {
    cloud.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  }
  quantize_cloud(cloud);
  cloud.validate();
  return cloud;
}

Vec3 object_keypoint(ObjectKind kind, const ObjectParams& params,
                     const std::string& name) {
  const std::vector<double> p = params_or_default(kind, params.values);
  if (kind == ObjectKind::kTeapot && name == "spout_tip") {
    return (p[0] + p[1]) * teapot_spout_dir();
  }
  if (kind == ObjectKind::kHammer && name == "head_center") {
    return Vec3(0, 0, p[0] + p[3] / 2.0);
  }
  if (name == "origin") {
    return Vec3::Zero();
  }
  throw InvalidInput("object_keypoint: unknown keypoint " + name + " for " +
                     to_string(kind));
}

ChainSpec default_chain() {
  auto t = [](double x, double y, double z) {
    return Transform3(Rotation3::identity(), Vec3(x, y, z));
  };
  ChainSpec chain;
  chain.joints = {
      {Joint::Type::kRevolute, t(0, 0, 0.10), Vec3::UnitZ(),
       std::make_pair(-2.8, 2.8)},
      {Joint::Type::kRevolute, t(0, 0, 0.05), Vec3::UnitY(),
       std::make_pair(-2.0, 2.0)},
      {Joint::Type::kRevolute, t(0.25, 0, 0), Vec3::UnitY(),
       std::make_pair(-2.4, 2.4)},
      {Joint::Type::kRevolute, t(0.20, 0, 0), Vec3::UnitX(),
       std::make_pair(-2.8, 2.8)},
      {Joint::Type::kRevolute, t(0.05, 0, 0), Vec3::UnitY(),
       std::make_pair(-1.9, 1.9)},
      {Joint::Type::kRevolute, t(0.05, 0, 0), Vec3::UnitX(),
       std::make_pair(-2.8, 2.8)},
  };
  chain.tip_offset = t(0.08, 0, 0);
  return chain;
}

void Scenario::validate() const {
  object_cloud.validate();
  if (!(alpha_true >= 0.2 && alpha_true <= 5.0)) {
    throw InvalidInput("Scenario: alpha_true must be in [0.2, 5.0]");
  }
  chain.validate();
  noise.validate();
  if (train_configs.size() < 2) {
    throw InvalidInput("Scenario: need at least 2 train configurations");
  }
  intrinsics.validate();
  if (raster_width < 2 || raster_height < 2) {
    throw InvalidInput("Scenario: pointmap raster must be at least 2x2");
  }
  if (image_width < 8 || image_height < 8) {
    throw InvalidInput("Scenario: image raster must be at least 8x8");
  }
}

ScenarioOutputs generate(const Scenario& scenario) {
  scenario.validate();
  const double alpha = scenario.alpha_true;
  const Transform3& v = scenario.cam_base_true;
  const Transform3 h_inv = inverse(scenario.H_true);
  const int n_train = static_cast<int>(scenario.train_configs.size());
  const int n_test = static_cast<int>(scenario.test_configs.size());

  // Unscaled reconstruction gauge: world = object frame / alpha.
  MatX3 gauge_points = scenario.object_cloud.points / alpha;

  struct PoseData {
    Transform3 ee;
    Transform3 cam_metric;   // object (meters) -> camera
    Rotation3 rot;           // unscaled blocks
    Vec3 trans_gauge;
    double depth_mult = 1.0;
  };
  auto make_pose = [&](const Configuration& q, const std::string& name,
                       int index) {
    PoseData d;
    d.ee = fk(scenario.chain, q);
    d.cam_metric = compose(compose(h_inv, inverse(d.ee)), v);
    const Visibility vis =
        check_visibility(scenario.object_cloud.points, d.cam_metric,
                         scenario.intrinsics, scenario.image_width,
                         scenario.image_height, 0.65);
    if (!vis.ok) {
      throw InvalidInput(
          "generate: configuration " + name + "[" + std::to_string(index) +
          "] violates visibility (min depth " +
          std::to_string(vis.min_depth) + " m, in-frame fraction " +
          std::to_string(vis.in_frame_fraction) + ")");
    }
    d.rot = d.cam_metric.rotation();
    d.trans_gauge = d.cam_metric.translation() / alpha;
    // Pointmap pose error grows sharply as the camera recedes: near poses
    // stay clean while far ones degrade toward junk, which is what the
    // distance-scaled noise flag models.
    const double rel_depth = vis.mean_depth / 0.55;
    d.depth_mult = scenario.noise.distance_scaling
                       ? rel_depth * rel_depth * rel_depth
                       : 1.0;
    return d;
  };

  std::vector<PoseData> train;
  train.reserve(static_cast<size_t>(n_train));
  for (int n = 0; n < n_train; ++n) {
    train.push_back(
        make_pose(scenario.train_configs[static_cast<size_t>(n)], "train", n));
  }
  std::vector<PoseData> test;
  test.reserve(static_cast<size_t>(n_test));
  for (int n = 0; n < n_test; ++n) {
    test.push_back(
        make_pose(scenario.test_configs[static_cast<size_t>(n)], "test", n));
  }

  ScenarioOutputs out;
  out.chain = scenario.chain;
  out.train_configs = scenario.train_configs;
  out.test_configs = scenario.test_configs;

  // Problem (already-aligned entry point). Pose noise perturbs the
  // unscaled camera-object poses; point noise perturbs the reconstruction.
  auto point_rng = detail::Rng::stream(scenario.seed, 5);
  DenseCloud dense;
  dense.points = gauge_points;
  const double point_sigma_gauge = scenario.noise.point_sigma / alpha;
  if (point_sigma_gauge > 0.0) {
    for (Eigen::Index i = 0; i < dense.points.rows(); ++i) {
      dense.points.row(i) +=
          (point_sigma_gauge * point_rng.gaussian3()).transpose();
    }
  }
  const double conf_value =
      1.0 + 1.5 * std::exp(-point_sigma_gauge / 0.01);
  dense.confidence = VecX::Constant(dense.points.rows(), f32(conf_value));
  quantize_cloud(dense);

  out.problem.dense = dense;
  out.problem.intrinsics = scenario.intrinsics;
  out.problem.render_subsample = scenario.render_subsample;
  for (int n = 0; n < n_train; ++n) {
    const PoseData& d = train[static_cast<size_t>(n)];
    out.problem.ee_poses.push_back(d.ee);
    auto rng = detail::Rng::stream(scenario.seed, 10 + static_cast<uint64_t>(n));
    const Vec3 omega =
        scenario.noise.pose_rot_sigma * d.depth_mult * rng.gaussian3();
    const Vec3 delta = (scenario.noise.pose_trans_sigma * d.depth_mult /
                        alpha) * rng.gaussian3();
    const Mat3 rot_noisy = d.rot.matrix() * detail::so3_exp(omega);
    out.problem.cam_obj_poses.push_back(CameraObjectPose{
        procrustes_project(rot_noisy), d.trans_gauge + delta});
  }

  // Pairwise entry point: every unordered pair plus a closing pair so each
  // image leads at least once. Pixel (w, h) of every image is bound to the
  // same reconstruction sample, so rasters are consistent across pairs.
  const Eigen::Index n_px =
      static_cast<Eigen::Index>(scenario.raster_width) *
      scenario.raster_height;
  const Eigen::Index n_src = gauge_points.rows();
  std::vector<Eigen::Index> src_index(static_cast<size_t>(n_px));
  for (Eigen::Index px = 0; px < n_px; ++px) {
    src_index[static_cast<size_t>(px)] = (px * n_src) / n_px;
  }
  std::vector<std::pair<int, int>> pair_list;
  for (int n = 0; n < n_train; ++n) {
    for (int m = n + 1; m < n_train; ++m) {
      pair_list.emplace_back(n, m);
    }
  }
  pair_list.emplace_back(n_train - 1, 0);

  for (size_t p = 0; p < pair_list.size(); ++p) {
    const auto [pn, pm] = pair_list[p];
    auto rng = detail::Rng::stream(scenario.seed, 1000 + static_cast<uint64_t>(p));
    const double pair_scale = std::exp(rng.uniform(-0.5, 0.5));
    const PoseData& leader = train[static_cast<size_t>(pn)];
    const Transform3 cam_gauge(leader.rot, leader.trans_gauge);

    PairPrediction pred;
    pred.n = pn;
    pred.m = pm;
    const double sigma_px =
        point_sigma_gauge * leader.depth_mult / pair_scale;
    const double conf =
        f32(1.0 + 1.5 * std::exp(-(point_sigma_gauge * leader.depth_mult) /
                                 0.01));
    auto fill = [&](Pointmap& map, ConfidenceMap& cmap) {
      map.width = scenario.raster_width;
      map.height = scenario.raster_height;
      map.coords.resize(n_px, 3);
      for (Eigen::Index px = 0; px < n_px; ++px) {
        const Vec3 world =
            gauge_points.row(src_index[static_cast<size_t>(px)]).transpose();
        Vec3 local = (cam_gauge * world) / pair_scale;
        if (sigma_px > 0.0) {
          local += sigma_px * rng.gaussian3();
        }
        map.coords(px, 0) = f32(local.x());
        map.coords(px, 1) = f32(local.y());
        map.coords(px, 2) = f32(local.z());
      }
      cmap.width = map.width;
      cmap.height = map.height;
      cmap.values = VecX::Constant(n_px, conf);
    };
    fill(pred.x_nn, pred.c_nn);
    fill(pred.x_nm, pred.c_nm);
    out.pairs.push_back(std::move(pred));
  }

  // Ground truth.
  out.truth.H_true = scenario.H_true;
  out.truth.alpha_true = alpha;
  out.truth.cam_base_true = v;
  for (int n = 0; n < n_train; ++n) {
    const PoseData& d = train[static_cast<size_t>(n)];
    out.truth.train_camera_poses.push_back(
        inverse(Transform3(d.rot, d.trans_gauge)));
  }
  for (int n = 0; n < n_test; ++n) {
    const PoseData& d = test[static_cast<size_t>(n)];
    out.truth.test_ee_poses.push_back(d.ee);
    out.truth.test_cam_obj_poses.push_back(
        CameraObjectPose{d.rot, d.trans_gauge});
    BinaryRaster mask;
    mask.width = scenario.image_width;
    mask.height = scenario.image_height;
    mask.data.assign(
        static_cast<size_t>(mask.width) * mask.height, 0);
    const MatX3 cam_pts =
        transform_points(scenario.object_cloud.points, d.cam_metric);
    for (Eigen::Index i = 0; i < cam_pts.rows(); ++i) {
      const double w = cam_pts(i, 2);
      if (!(w > 1e-9)) {
        continue;
      }
      const double u =
          (scenario.intrinsics.fx * cam_pts(i, 0) + scenario.intrinsics.cx * w) / w;
      const double vv =
          (scenario.intrinsics.fy * cam_pts(i, 1) + scenario.intrinsics.cy * w) / w;
      const int col = static_cast<int>(std::lround(u));
      const int row = static_cast<int>(std::lround(vv));
      if (col >= 0 && row >= 0 && col < mask.width && row < mask.height) {
        mask.at(col, row) = 1;
      }
    }
    out.truth.test_masks.push_back(std::move(mask));
  }
  return out;
}

void export_scenario(const ScenarioOutputs& outputs,
                     const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  fs::create_directories(dir / "pairs");
  fs::create_directories(dir / "testset");

  save_problem(dir / "problem.json", outputs.problem, "dense.ply");

  std::vector<std::array<std::string, 2>> files;
  std::vector<std::pair<int, int>> pairs;
  for (size_t p = 0; p < outputs.pairs.size(); ++p) {
    const auto& pred = outputs.pairs[p];
    char name_n[64], name_m[64];
    std::snprintf(name_n, sizeof(name_n), "pair_%03zu_n.pmap", p);
    std::snprintf(name_m, sizeof(name_m), "pair_%03zu_m.pmap", p);
    write_pmap(dir / "pairs" / name_n, pred.x_nn, pred.c_nn);
    write_pmap(dir / "pairs" / name_m, pred.x_nm, pred.c_nm);
    files.push_back({name_n, name_m});
    pairs.emplace_back(pred.n, pred.m);
  }
  write_manifest(dir / "pairs" / "manifest.json", files, pairs);

  nlohmann::json truth;
  truth["H"] = detail::matrix_json(outputs.truth.H_true);
  truth["alpha"] = outputs.truth.alpha_true;
  truth["cam_base"] = detail::matrix_json(outputs.truth.cam_base_true);
  truth["train_camera_poses"] = nlohmann::json::array();
  for (const auto& p : outputs.truth.train_camera_poses) {
    truth["train_camera_poses"].push_back(detail::matrix_json(p));
  }
  truth["test_cam_obj_poses"] = nlohmann::json::array();
  for (const auto& p : outputs.truth.test_cam_obj_poses) {
    truth["test_cam_obj_poses"].push_back(
        detail::matrix_json(p.as_transform()));
  }
  {
    std::ofstream out_file(dir / "ground_truth.json");
    if (!out_file.good()) {
      throw InvalidInput("export_scenario: cannot write ground_truth.json");
    }
    out_file << truth.dump(2) << "\n";
  }

  save_chain(dir / "chain.json", outputs.chain);
  {
    nlohmann::json configs;
    configs["train"] = nlohmann::json::array();
    for (const auto& q : outputs.train_configs) {
      nlohmann::json arr = nlohmann::json::array();
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        arr.push_back(q(i));
      }
      configs["train"].push_back(arr);
    }
    configs["test"] = nlohmann::json::array();
    for (const auto& q : outputs.test_configs) {
      nlohmann::json arr = nlohmann::json::array();
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        arr.push_back(q(i));
      }
      configs["test"].push_back(arr);
    }
    std::ofstream out_file(dir / "configs.json");
    if (!out_file.good()) {
      throw InvalidInput("export_scenario: cannot write configs.json");
    }
    out_file << configs.dump(2) << "\n";
  }

  nlohmann::json testset = nlohmann::json::array();
  for (size_t i = 0; i < outputs.truth.test_ee_poses.size(); ++i) {
    char mask_name[64];
    std::snprintf(mask_name, sizeof(mask_name), "mask_%03zu.pgm", i);
    write_pgm_mask(dir / "testset" / mask_name, outputs.truth.test_masks[i]);
    nlohmann::json entry;
    entry["ee_pose"] = detail::matrix_json(outputs.truth.test_ee_poses[i]);
    entry["mask"] = mask_name;
    testset.push_back(entry);
  }
  {
    std::ofstream out_file(dir / "testset" / "test_poses.json");
    if (!out_file.good()) {
      throw InvalidInput("export_scenario: cannot write test_poses.json");
    }
    out_file << testset.dump(2) << "\n";
  }
}

ScenarioSpec load_scenario_spec(const std::filesystem::path& path) {
  const auto j = detail::parse_json_file(path, "load_scenario_spec");
  static const std::vector<std::string> known = {
      "seed",  "object", "n_train",          "n_test", "alpha",
      "noise", "raster", "image",            "intrinsics",
      "chain", "render_subsample"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidInput("scenario spec: unknown key \"" + key + "\"");
    }
  }
  ScenarioSpec spec;
  spec.seed = j.value("seed", 0ull);
  if (j.contains("object")) {
    const auto& obj = j["object"];
    spec.kind = object_kind_from_string(obj.value("kind", "hammer"));
    if (obj.contains("params")) {
      for (const auto& v : obj["params"]) {
        spec.object_params.values.push_back(v.get<double>());
      }
    }
    spec.object_params.target_points = obj.value("points", 4000);
  }
  spec.n_train = j.value("n_train", 9);
  spec.n_test = j.value("n_test", 4);
  spec.alpha = j.value("alpha", 0.0);
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    spec.noise.point_sigma = n.value("point_sigma", 0.0);
    spec.noise.pose_rot_sigma = n.value("pose_rot_sigma", 0.0);
    spec.noise.pose_trans_sigma = n.value("pose_trans_sigma", 0.0);
    spec.noise.distance_scaling = n.value("distance_scaling", false);
  }
  if (j.contains("raster")) {
    spec.raster_width = j["raster"].value("width", 24);
    spec.raster_height = j["raster"].value("height", 18);
  }
  if (j.contains("image")) {
    spec.image_width = j["image"].value("width", 640);
    spec.image_height = j["image"].value("height", 480);
  }
  if (j.contains("intrinsics")) {
    spec.intrinsics =
        detail::intrinsics_from_json(j["intrinsics"], "scenario spec");
  }
  spec.render_subsample = j.value("render_subsample", 8);
  if (j.contains("chain")) {
    spec.chain = detail::chain_from_json(j["chain"]);
  }
  if (spec.n_train < 2 || spec.n_test < 0) {
    throw InvalidInput("scenario spec: n_train must be >= 2, n_test >= 0");
  }
  return spec;
}

Scenario build_scenario(const ScenarioSpec& spec) {
  Scenario scn;
  scn.seed = spec.seed;
  scn.object_cloud = make_object(spec.kind, spec.object_params);
  scn.chain = spec.chain.value_or(default_chain());
  scn.intrinsics = spec.intrinsics;
  scn.image_width = spec.image_width;
  scn.image_height = spec.image_height;
  scn.raster_width = spec.raster_width;
  scn.raster_height = spec.raster_height;
  scn.render_subsample = spec.render_subsample;
  scn.noise = spec.noise;

  auto rng_h = detail::Rng::stream(spec.seed, 1);
  scn.H_true = Transform3(
      Rotation3::about_axis(rng_h.unit_vector(), rng_h.uniform(0.0, M_PI)),
      Vec3(rng_h.uniform(-0.12, 0.12), rng_h.uniform(-0.12, 0.12),
           rng_h.uniform(-0.12, 0.12)));

  if (spec.alpha > 0.0) {
    scn.alpha_true = spec.alpha;
  } else {
    scn.alpha_true = detail::Rng::stream(spec.seed, 2).uniform(0.5, 2.0);
  }

  Configuration q_home;
  if (spec.chain) {
    q_home = Configuration::Zero(scn.chain.dof());
  } else {
    q_home = Configuration(6);
    q_home << 0.0, 0.7, -1.1, 0.0, 0.6, 0.0;
  }

  const Transform3 ee_home = fk(scn.chain, q_home);
  auto rng_cam = detail::Rng::stream(spec.seed, 4);
  const Transform3 cam_nominal(
      Rotation3::about_axis(rng_cam.unit_vector(), rng_cam.uniform(0.0, 0.35)),
      Vec3(rng_cam.uniform(-0.04, 0.04), rng_cam.uniform(-0.04, 0.04),
           rng_cam.uniform(0.5, 0.6)));
  scn.cam_base_true = compose(compose(ee_home, scn.H_true), cam_nominal);

  // Rejection-sample visible configurations, then pick depth-diverse
  // subsets so distance-scaled noise has contrast to act on.
  const Transform3 h_inv = inverse(scn.H_true);
  const MatX3 vis_points = subsample_rows(scn.object_cloud.points, 8);
  auto rng_q = detail::Rng::stream(spec.seed, 3);
  struct Candidate {
    Configuration q;
    double depth;
  };
  std::vector<Candidate> pool;
  const int want = 3 * (spec.n_train + spec.n_test);
  // Keep sampling until the pool also spans a wide depth range, so
  // distance-scaled noise has real near/far contrast to act on.
  constexpr double kDepthSpan = 2.2;
  double z_lo = std::numeric_limits<double>::infinity();
  double z_hi = 0.0;
  for (int attempt = 0; attempt < 20000; ++attempt) {
    if (static_cast<int>(pool.size()) >= want && z_hi >= kDepthSpan * z_lo) {
      break;
    }
    Configuration q = q_home;
    for (int i = 0; i < q.size(); ++i) {
      q(i) += rng_q.uniform(-0.85, 0.85);
    }
    q = scn.chain.clamp(q);
    const Transform3 cam =
        compose(compose(h_inv, inverse(fk(scn.chain, q))), scn.cam_base_true);
    const Visibility vis =
        check_visibility(vis_points, cam, scn.intrinsics, scn.image_width,
                         scn.image_height, 0.8);
    if (vis.ok && vis.min_depth > 0.15) {
      pool.push_back({q, vis.mean_depth});
      z_lo = std::min(z_lo, vis.mean_depth);
      z_hi = std::max(z_hi, vis.mean_depth);
    }
  }
  if (static_cast<int>(pool.size()) < spec.n_train + spec.n_test) {
    throw InvalidInput(
        "build_scenario: could not sample enough visible configurations "
        "(got " +
        std::to_string(pool.size()) + ")");
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.depth < b.depth;
                   });
  std::vector<bool> taken(pool.size(), false);
  auto pick_spread = [&](int count) {
    std::vector<size_t> free_idx;
    for (size_t k = 0; k < pool.size(); ++k) {
      if (!taken[k]) {
        free_idx.push_back(k);
      }
    }
    std::vector<char> used(free_idx.size(), 0);
    std::vector<Configuration> configs;
    for (int i = 0; i < count; ++i) {
      size_t t = count == 1
                     ? 0
                     : static_cast<size_t>(std::lround(
                           static_cast<double>(i) * (free_idx.size() - 1) /
                           (count - 1)));
      while (t < used.size() && used[t]) {
        ++t;
      }
      if (t >= used.size()) {
        for (t = 0; t < used.size() && used[t]; ++t) {
        }
      }
      used[t] = 1;
      taken[free_idx[t]] = true;
      configs.push_back(pool[free_idx[t]].q);
    }
    return configs;
  };
  scn.train_configs = pick_spread(spec.n_train);
  scn.test_configs = pick_spread(spec.n_test);

  double max_spread = 0.0;
  for (size_t a = 0; a < scn.train_configs.size(); ++a) {
    for (size_t b = a + 1; b < scn.train_configs.size(); ++b) {
      max_spread = std::max(
          max_spread,
          (fk(scn.chain, scn.train_configs[a]).translation() -
           fk(scn.chain, scn.train_configs[b]).translation())
              .norm());
    }
  }
  if (max_spread < 0.2) {
    throw InvalidInput(
        "build_scenario: sampled end-effector translations span less than "
        "0.2 m; the scale is weakly identifiable");
  }
  GA_LOG_DEBUG("build_scenario: ee spread " << max_spread << " m, alpha "
                                            << scn.alpha_true);
  return scn;
}

}  // namespace graspalign
