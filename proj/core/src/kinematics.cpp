#include <graspalign/kinematics.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include <graspalign/detail/chain_json.hpp>
#include <graspalign/detail/json_util.hpp>
#include <graspalign/detail/lie.hpp>
#include <graspalign/similarity.hpp>

namespace graspalign {

namespace {

Transform3 joint_motion(const Joint& joint, double q) {
  if (joint.type == Joint::Type::kRevolute) {
    return Transform3(Rotation3::about_axis(joint.axis, q), Vec3::Zero());
  }
  return Transform3(Rotation3::identity(), q * joint.axis);
}

}  // namespace

void ChainSpec::validate() const {
  if (joints.empty() || joints.size() > 12) {
    throw InvalidInput("ChainSpec: joint count must be in [1, 12]");
  }
  for (const auto& j : joints) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw InvalidInput("ChainSpec: joint axes must have unit norm");
    }
    if (j.limits && !(j.limits->first <= j.limits->second)) {
      throw InvalidInput("ChainSpec: joint limits out of order");
    }
  }
}

Configuration ChainSpec::clamp(const Configuration& q) const {
  Configuration out = q;
  for (int i = 0; i < dof(); ++i) {
    const auto& lim = joints[static_cast<size_t>(i)].limits;
    if (lim) {
      out(i) = std::clamp(out(i), lim->first, lim->second);
    }
  }
  return out;
}

double ChainSpec::reach() const {
  double total = tip_offset.translation().norm();
  for (const auto& j : joints) {
    total += j.parent_offset.translation().norm();
  }
  return total;
}

void PointsOfInterest::validate() const {
  if (points.rows() < 1) {
    throw InvalidInput("PointsOfInterest: need at least 1 point");
  }
  if (!points.allFinite()) {
    throw InvalidInput("PointsOfInterest: non-finite coordinates");
  }
}

Transform3 fk(const ChainSpec& chain, const Configuration& q) {
  chain.validate();
  if (q.size() != chain.dof()) {
    throw InvalidInput("fk: configuration length " + std::to_string(q.size()) +
                       " does not match chain dof " +
                       std::to_string(chain.dof()));
  }
  Transform3 pose;
  for (int i = 0; i < chain.dof(); ++i) {
    const auto& joint = chain.joints[static_cast<size_t>(i)];
    pose = compose(compose(pose, joint.parent_offset),
                   joint_motion(joint, q(i)));
  }
  return compose(pose, chain.tip_offset);
}

MatX3 psi(const ChainSpec& chain, const Configuration& q, const Transform3& H,
          const PointsOfInterest& poi) {
  poi.validate();
  const Transform3 mapping = inverse(compose(fk(chain, q), H));
  return transform_points(poi.points, mapping);
}

Configuration ik(const ChainSpec& chain, const Transform3& target,
                 const Configuration& q0, const IkOptions& opts) {
  chain.validate();
  if (q0.size() != chain.dof()) {
    throw InvalidInput("ik: configuration length mismatch");
  }
  const int n = chain.dof();
  Configuration q = chain.clamp(q0);
  double best_residual = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    // Joint frames along the chain for the geometric Jacobian.
    std::vector<Transform3> joint_frames(static_cast<size_t>(n));
    Transform3 pose;
    for (int i = 0; i < n; ++i) {
      const auto& joint = chain.joints[static_cast<size_t>(i)];
      pose = compose(pose, joint.parent_offset);
      joint_frames[static_cast<size_t>(i)] = pose;
      pose = compose(pose, joint_motion(joint, q(i)));
    }
    const Transform3 tip = compose(pose, chain.tip_offset);

    const double residual = se3_distance(tip, target, 1.0);
    best_residual = std::min(best_residual, residual);
    if (residual < opts.tol) {
      return q;
    }
    if (iter == opts.max_iters) {
      break;
    }

    Eigen::Matrix<double, 6, 1> err;
    err.head<3>() = target.translation() - tip.translation();
    err.tail<3>() = detail::so3_log(target.rotation().matrix() *
                                    tip.rotation().matrix().transpose());

    Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, n);
    const Vec3 p_tip = tip.translation();
    for (int i = 0; i < n; ++i) {
      const auto& frame = joint_frames[static_cast<size_t>(i)];
      const Vec3 axis_w = frame.rotation().matrix() *
                          chain.joints[static_cast<size_t>(i)].axis;
      if (chain.joints[static_cast<size_t>(i)].type ==
          Joint::Type::kRevolute) {
        jac.col(i).head<3>() = axis_w.cross(p_tip - frame.translation());
        jac.col(i).tail<3>() = axis_w;
      } else {
        jac.col(i).head<3>() = axis_w;
        jac.col(i).tail<3>().setZero();
      }
    }

    Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
    jjt.diagonal().array() += opts.damping * opts.damping;
    VecX dq = jac.transpose() * jjt.ldlt().solve(err);
    dq = dq.cwiseMax(-opts.step_clamp).cwiseMin(opts.step_clamp);
    q = chain.clamp(q + dq);
  }
  throw IkFailure("ik: no convergence after " +
                      std::to_string(opts.max_iters) +
                      " iterations (best residual " +
                      std::to_string(best_residual) + ")",
                  best_residual);
}

Configuration psi_inverse(const ChainSpec& chain,
                          const Transform3& object_pose_in_base,
                          const Transform3& H, const Configuration& q0,
                          const IkOptions& opts) {
  // The object pose in base is (phi(q) H)^-1, so the required end-effector
  // pose is its inverse composed with H^-1.
  const Transform3 required_ee =
      compose(inverse(object_pose_in_base), inverse(H));
  return ik(chain, required_ee, q0, opts);
}

Transform3 pivot_goal(const Transform3& current_object_pose, const Vec3& pivot,
                      const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-9) {
    throw InvalidInput("pivot_goal: axis must have unit norm");
  }
  const Vec3 pivot_base = current_object_pose * pivot;
  const Rotation3 rot = Rotation3::about_axis(axis, angle);
  // Screw motion about the line through pivot_base: conjugate the rotation
  // by the pivot translation, then apply to the pose.
  const Transform3 about_pivot(
      rot, pivot_base - rot.matrix() * pivot_base);
  return compose(about_pivot, current_object_pose);
}

Transform3 object_pose_from_points(const PointsOfInterest& poi,
                                   const MatX3& requested_base_points) {
  poi.validate();
  if (requested_base_points.rows() != poi.points.rows()) {
    throw InvalidInput("object_pose_from_points: point count mismatch");
  }
  const SimilarityFit fit = fit_rigid(poi.points, requested_base_points);
  return fit.transform;
}

namespace detail {

ChainSpec chain_from_json(const nlohmann::json& j) {
  if (!j.contains("joints") || !j.contains("tip_offset")) {
    throw InvalidInput("chain: missing joints/tip_offset");
  }
  ChainSpec chain;
  for (const auto& je : j["joints"]) {
    Joint joint;
    const std::string type = je.value("type", "revolute");
    if (type == "revolute") {
      joint.type = Joint::Type::kRevolute;
    } else if (type == "prismatic") {
      joint.type = Joint::Type::kPrismatic;
    } else {
      throw InvalidInput("chain: unknown joint type " + type);
    }
    joint.parent_offset =
        matrix_from_json(je.at("parent_offset"), "parent_offset");
    const auto& axis = je.at("axis");
    if (!axis.is_array() || axis.size() != 3) {
      throw InvalidInput("chain: axis must be a 3-vector");
    }
    joint.axis = Vec3(axis[0].get<double>(), axis[1].get<double>(),
                      axis[2].get<double>());
    if (je.contains("limits")) {
      joint.limits = std::make_pair(je["limits"][0].get<double>(),
                                    je["limits"][1].get<double>());
    }
    chain.joints.push_back(joint);
  }
  chain.tip_offset = matrix_from_json(j["tip_offset"], "tip_offset");
  chain.validate();
  return chain;
}

nlohmann::json chain_to_json(const ChainSpec& chain) {
  chain.validate();
  nlohmann::json j;
  j["joints"] = nlohmann::json::array();
  for (const auto& joint : chain.joints) {
    nlohmann::json je;
    je["type"] =
        joint.type == Joint::Type::kRevolute ? "revolute" : "prismatic";
    je["parent_offset"] = matrix_json(joint.parent_offset);
    je["axis"] = {joint.axis.x(), joint.axis.y(), joint.axis.z()};
    if (joint.limits) {
      je["limits"] = {joint.limits->first, joint.limits->second};
    }
    j["joints"].push_back(je);
  }
  j["tip_offset"] = matrix_json(chain.tip_offset);
  return j;
}

}  // namespace detail

ChainSpec load_chain(const std::filesystem::path& path) {
  const auto j = detail::parse_json_file(path, "load_chain");
  try {
    return detail::chain_from_json(j);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(e.what()) + " in " + path.string());
  }
}

void save_chain(const std::filesystem::path& path, const ChainSpec& chain) {
  const nlohmann::json j = detail::chain_to_json(chain);
  std::ofstream out(path);
  if (!out.good()) {
    throw InvalidInput("save_chain: cannot open " + path.string());
  }
  out << j.dump(2) << "\n";
}

}  // namespace graspalign
