#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <graspalign/baselines.hpp>
#include <graspalign/coord_align.hpp>
#include <graspalign/detail/json_util.hpp>
#include <graspalign/detail/log.hpp>
#include <graspalign/evaluation.hpp>
#include <graspalign/global_align.hpp>
#include <graspalign/io.hpp>
#include <graspalign/kinematics.hpp>
#include <graspalign/metrics.hpp>
#include <graspalign/ope.hpp>
#include <graspalign/synth.hpp>

namespace fs = std::filesystem;
using namespace graspalign;

namespace {

// Exit codes, fixed for scriptability.
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitGraph = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIk = 5;

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct CommonFlags {
  uint64_t seed = 0;
  int threads = 1;
  std::string config;
  bool seed_given = false;
};

void add_common(CLI::App* sub, CommonFlags& common) {
  sub->add_option("--seed", common.seed, "Random seed")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", common.threads, "Worker threads (default 1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--config", common.config,
                  "JSON config file; explicit flags override its values");
}

// Applies --config by injecting "--key value" tokens ahead of the user's
// flags; every option uses take-last so the command line wins. Unknown
// config keys are rejected.
std::vector<std::string> merge_config(const CLI::App& app,
                                      std::vector<std::string> args) {
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty() || args.empty()) {
    return args;
  }
  const std::string sub_name = args[0];
  const CLI::App* sub = nullptr;
  for (const auto* candidate : app.get_subcommands({})) {
    if (candidate->get_name() == sub_name) {
      sub = candidate;
    }
  }
  if (sub == nullptr) {
    return args;
  }
  const auto j = detail::parse_json_file(config_path, "config");
  if (!j.is_object()) {
    throw InvalidInput("config: expected a JSON object");
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw InvalidInput("config: unknown key \"" + key + "\"");
    }
    if (value.is_boolean()) {
      if (value.get<bool>()) {
        injected.push_back("--" + key);
      }
      continue;
    }
    injected.push_back("--" + key);
    if (value.is_string()) {
      injected.push_back(value.get<std::string>());
    } else {
      injected.push_back(value.dump());
    }
  }
  std::vector<std::string> merged;
  merged.push_back(args[0]);
  merged.insert(merged.end(), injected.begin(), injected.end());
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

std::vector<TestPose> load_testset(const fs::path& dir) {
  const auto j = detail::parse_json_file(dir / "test_poses.json", "testset");
  if (!j.is_array() || j.empty()) {
    throw InvalidInput("testset: expected a nonempty test_poses.json array");
  }
  std::vector<TestPose> poses;
  for (const auto& entry : j) {
    TestPose test;
    test.ee_pose = detail::matrix_from_json(entry.at("ee_pose"),
                                            "test ee_pose");
    const fs::path mask_path = dir / entry.at("mask").get<std::string>();
    if (!fs::exists(mask_path)) {
      throw InvalidInput("testset: missing mask " + mask_path.string());
    }
    test.mask = read_pgm_mask(mask_path);
    poses.push_back(std::move(test));
  }
  return poses;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 const CommonFlags& common) {
  ScenarioSpec spec = load_scenario_spec(spec_path);
  if (common.seed_given) {
    spec.seed = common.seed;
  }
  const Scenario scenario = build_scenario(spec);
  const ScenarioOutputs outputs = generate(scenario);
  export_scenario(outputs, out_dir);
  std::cout << "simulate: wrote " << out_dir << " ("
            << outputs.problem.pose_count() << " train poses, "
            << outputs.pairs.size() << " pairs, "
            << outputs.truth.test_ee_poses.size() << " test poses, alpha "
            << fmt6(outputs.truth.alpha_true) << ")\n";
  return kExitOk;
}

int cmd_align(const std::string& manifest_path, const std::string& out_dir,
              double conf_threshold, int max_iters, double lr,
              std::optional<double> loss_threshold, bool export_pose_clouds,
              const CommonFlags& common) {
  const auto preds = read_manifest(manifest_path);
  AlignOptions opts;
  opts.conf_threshold = conf_threshold;
  opts.max_iters = max_iters;
  opts.lr = lr;
  opts.threads = common.threads;
  const GlobalAlignmentResult result = global_align(preds, opts);

  fs::create_directories(out_dir);
  write_ply(fs::path(out_dir) / "dense.ply", result.dense);
  nlohmann::json j;
  j["camera_poses"] = nlohmann::json::array();
  for (const auto& pose : result.camera_poses) {
    j["camera_poses"].push_back(detail::matrix_json(pose));
  }
  j["final_loss"] = result.final_loss;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  std::ofstream out(fs::path(out_dir) / "poses.json");
  out << j.dump(2) << "\n";
  if (!out.good()) {
    throw InvalidInput("align: cannot write poses.json");
  }

  if (export_pose_clouds) {
    const auto posed = reinterpret(result);
    for (size_t n = 0; n < posed.size(); ++n) {
      char name[64];
      std::snprintf(name, sizeof(name), "pose_cloud_%03zu.ply", n);
      write_ply(fs::path(out_dir) / name, posed[n].cloud());
    }
  }

  std::cout << "align: final loss " << fmt6(result.final_loss)
            << " over " << result.iterations << " iterations (converged="
            << (result.converged ? "yes" : "no") << "), "
            << result.dense.points.rows() << " dense points\n";
  if (loss_threshold && result.final_loss > *loss_threshold) {
    std::cerr << "align: loss " << fmt6(result.final_loss)
              << " above threshold " << fmt6(*loss_threshold) << "\n";
    return kExitDivergence;
  }
  return kExitOk;
}

void print_ground_truth_comparison(const std::string& gt_path,
                                   const Transform3& h, double alpha) {
  const auto j = detail::parse_json_file(gt_path, "ground truth");
  const Transform3 h_true = detail::matrix_from_json(j.at("H"), "true H");
  const double alpha_true = j.at("alpha").get<double>();
  const double rot_err_deg =
      geodesic_angle(h.rotation(), h_true.rotation()) * 180.0 / M_PI;
  const double trans_err = (h.translation() - h_true.translation()).norm();
  const double alpha_rel = std::abs(alpha - alpha_true) / alpha_true;
  std::cout << "solve: H rotation error " << fmt6(rot_err_deg)
            << " deg, translation error " << fmt6(trans_err) << " m\n";
  std::cout << "solve: alpha " << fmt6(alpha) << " (true "
            << fmt6(alpha_true) << ", rel err " << fmt6(alpha_rel) << ")\n";
}

int cmd_solve(const std::string& problem_path, const std::string& out_path,
              const std::string& method, int starts, int iters,
              std::optional<double> init_alpha, double rot_weight,
              const std::string& ground_truth, const std::string& regressor_out,
              const CommonFlags& common) {
  const AlignmentProblem problem = load_problem(problem_path);

  if (method == "regress") {
    RegressorOptions opts;
    opts.seed = common.seed;
    std::vector<double> trace;
    const RegressorParams params = train_direct(
        problem.ee_poses, problem.cam_obj_poses, opts, &trace);
    const fs::path reg_path = regressor_out.empty()
                                  ? fs::path(out_path).replace_extension(
                                        ".regressor.json")
                                  : fs::path(regressor_out);
    save_regressor(reg_path, params);
    // The regressor does not estimate (H, alpha); the solution file records
    // the training objective for bookkeeping.
    AlignmentSolution placeholder;
    placeholder.final_loss = trace.empty() ? 0.0 : trace.back();
    placeholder.per_pose_residuals = VecX::Zero(problem.pose_count());
    save_solution(out_path, placeholder, "regress");
    std::cout << "solve: method regress, training loss "
              << fmt6(placeholder.final_loss) << ", regressor at "
              << reg_path.string() << "\n";
    return kExitOk;
  }

  SolverOptions opts;
  opts.seed = common.seed;
  opts.n_starts = starts;
  opts.max_iters = iters;
  opts.threads = common.threads;
  opts.init_alpha = init_alpha;
  const AlignmentSolution solution =
      method == "no-render" ? solve_no_render(problem, opts, rot_weight)
                            : solve_alignment(problem, opts);
  save_solution(out_path, solution, method);
  std::cout << "solve: method " << method << ", final loss "
            << fmt6(solution.final_loss) << " px, alpha "
            << fmt6(solution.alpha) << ", cam-base spread "
            << fmt6(solution.cam_base_spread) << "\n";
  if (!ground_truth.empty()) {
    print_ground_truth_comparison(ground_truth, solution.H, solution.alpha);
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& solution_path,
                 const std::string& testset_dir,
                 const std::string& report_path,
                 const std::string& problem_path, const std::string& method,
                 const std::string& regressor_path, int subsample,
                 bool no_overlays) {
  const AlignmentProblem problem = load_problem(problem_path);
  const std::vector<TestPose> test_poses = load_testset(testset_dir);

  EvalReport report;
  Transform3 h;
  double alpha = 1.0;
  std::optional<RegressorParams> regressor;
  if (method == "regress") {
    if (regressor_path.empty()) {
      throw InvalidInput("evaluate: --method regress requires --regressor");
    }
    regressor = load_regressor(regressor_path);
    report = evaluate_regressor(problem, *regressor, test_poses, subsample);
  } else {
    const AlignmentSolution solution = load_solution(solution_path);
    h = solution.H;
    alpha = solution.alpha;
    report = evaluate_solution(problem, h, alpha, test_poses, subsample);
  }

  const fs::path report_file(report_path);
  if (!no_overlays) {
    const fs::path overlay_dir = report_file.parent_path().empty()
                                     ? fs::path(".")
                                     : report_file.parent_path();
    for (size_t i = 0; i < test_poses.size(); ++i) {
      const Transform3 predicted =
          regressor ? predict_direct(*regressor, test_poses[i].ee_pose)
                    : estimate_pose_at(test_poses[i].ee_pose, h, alpha,
                                       problem);
      const Transform3 gauge_pose =
          regressor ? predicted
                    : Transform3(predicted.rotation(),
                                 predicted.translation() / alpha);
      char name[64];
      std::snprintf(name, sizeof(name), "overlay_%03zu.ppm", i);
      render_overlay(problem.dense, gauge_pose, problem.intrinsics,
                     test_poses[i].mask, overlay_dir / name);
    }
  }

  nlohmann::json j;
  j["method"] = method;
  j["per_pose"] = nlohmann::json::array();
  for (size_t i = 0; i < report.per_pose.size(); ++i) {
    const auto& p = report.per_pose[i];
    j["per_pose"].push_back({{"index", i},
                             {"D_AB", p.d_ab},
                             {"D_BA", p.d_ba},
                             {"D_hat", p.d_hat}});
  }
  j["mean_D_hat"] = report.mean_d_hat;
  std::ofstream out(report_file);
  out << j.dump(2) << "\n";
  if (!out.good()) {
    throw InvalidInput("evaluate: cannot write report " + report_path);
  }

  for (size_t i = 0; i < report.per_pose.size(); ++i) {
    std::cout << "evaluate: pose " << i << " D_hat "
              << fmt6(report.per_pose[i].d_hat) << " px\n";
  }
  std::cout << "evaluate: mean D_hat " << fmt6(report.mean_d_hat) << " px ("
            << method << ")\n";
  return kExitOk;
}

int cmd_pour(const std::string& solution_path, const std::string& chain_path,
             const std::vector<double>& pivot_xyz,
             const std::vector<double>& axis_xyz, double angle_deg,
             const std::vector<double>& q0_values) {
  const AlignmentSolution solution = load_solution(solution_path);
  const ChainSpec chain = load_chain(chain_path);
  if (pivot_xyz.size() != 3 || axis_xyz.size() != 3) {
    throw InvalidInput("pour: --pivot and --axis need 3 components");
  }
  if (static_cast<int>(q0_values.size()) != chain.dof()) {
    throw InvalidInput("pour: --q0 must match the chain's " +
                       std::to_string(chain.dof()) + " joints");
  }
  Configuration q0(chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    q0(i) = q0_values[static_cast<size_t>(i)];
  }
  const Vec3 pivot(pivot_xyz[0], pivot_xyz[1], pivot_xyz[2]);
  Vec3 axis(axis_xyz[0], axis_xyz[1], axis_xyz[2]);
  if (axis.norm() < 1e-12) {
    throw InvalidInput("pour: zero rotation axis");
  }
  axis.normalize();

  const Transform3 current_pose = inverse(compose(fk(chain, q0), solution.H));
  const Transform3 goal_pose =
      pivot_goal(current_pose, pivot, axis, angle_deg * M_PI / 180.0);
  const Configuration q_goal =
      psi_inverse(chain, goal_pose, solution.H, q0);

  PointsOfInterest poi;
  poi.points.resize(1, 3);
  poi.points.row(0) = pivot.transpose();
  const MatX3 before = psi(chain, q0, solution.H, poi);
  const MatX3 after = psi(chain, q_goal, solution.H, poi);
  const double displacement = (after.row(0) - before.row(0)).norm();

  std::cout << "pour: goal configuration";
  for (int i = 0; i < q_goal.size(); ++i) {
    std::cout << " " << fmt6(q_goal(i));
  }
  std::cout << "\n";
  std::cout << "pour: pivot displacement " << fmt6(displacement) << " m\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasped-object geometry and pose estimation toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CommonFlags common;

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Generate a synthetic scenario from a spec JSON");
  std::string sim_spec, sim_out;
  simulate->add_option("spec", sim_spec, "Scenario spec JSON")->required();
  simulate->add_option("out_dir", sim_out, "Output directory")->required();
  add_common(simulate, common);

  // align
  auto* align = app.add_subcommand(
      "align", "Solve the global pointmap alignment from a pair manifest");
  std::string align_manifest, align_out;
  double conf_threshold = 1.5, align_lr = 1e-2;
  int align_iters = 500;
  double loss_threshold_value = 0.0;
  bool export_pose_clouds = false;
  align->add_option("manifest", align_manifest, "Pair manifest JSON")
      ->required();
  align->add_option("out_dir", align_out, "Output directory")->required();
  align->add_option("--conf-threshold", conf_threshold,
                    "Dense extraction confidence threshold");
  align->add_option("--max-iters", align_iters, "Optimizer iterations");
  align->add_option("--lr", align_lr, "Optimizer step size");
  auto* loss_thr_opt = align->add_option(
      "--loss-threshold", loss_threshold_value,
      "Exit 4 when the final loss stays above this");
  align->add_flag("--export-pose-clouds", export_pose_clouds,
                  "Write per-pose reinterpreted clouds");
  add_common(align, common);

  // solve
  auto* solve = app.add_subcommand(
      "solve", "Solve the coordinate alignment for H and alpha");
  std::string solve_problem, solve_out, solve_method = "rendered";
  std::string solve_gt, solve_regressor_out;
  int solve_starts = 4, solve_iters = 2000;
  double solve_rot_weight = 1.0;
  double init_alpha_value = 0.0;
  solve->add_option("problem", solve_problem, "Problem JSON")->required();
  solve->add_option("out", solve_out, "Solution JSON path")->required();
  solve->add_option("--method", solve_method, "rendered | no-render | regress")
      ->check(CLI::IsMember({"rendered", "no-render", "regress"}));
  solve->add_option("--starts", solve_starts, "Multi-start count");
  solve->add_option("--iters", solve_iters, "Optimizer iterations");
  auto* init_alpha_opt =
      solve->add_option("--init-alpha", init_alpha_value,
                        "Override the scale initialization");
  solve->add_option("--rot-weight", solve_rot_weight,
                    "SE(3) rotation weight for --method no-render");
  solve->add_option("--ground-truth", solve_gt,
                    "Ground-truth JSON to compare against");
  solve->add_option("--regressor-out", solve_regressor_out,
                    "Where --method regress writes its parameters");
  add_common(solve, common);

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score a solution against test silhouettes");
  std::string eval_solution, eval_testset, eval_report, eval_problem;
  std::string eval_method = "rendered", eval_regressor;
  int eval_subsample = 1;
  bool eval_no_overlays = false;
  evaluate->add_option("solution", eval_solution, "Solution JSON")->required();
  evaluate->add_option("testset", eval_testset, "Test set directory")
      ->required();
  evaluate->add_option("report", eval_report, "Report JSON path")->required();
  evaluate->add_option("--problem", eval_problem, "Problem JSON")->required();
  evaluate
      ->add_option("--method", eval_method, "rendered | no-render | regress")
      ->check(CLI::IsMember({"rendered", "no-render", "regress"}));
  evaluate->add_option("--regressor", eval_regressor,
                       "RegressorParams JSON for --method regress");
  evaluate->add_option("--subsample", eval_subsample,
                       "Project every k-th reconstruction point");
  evaluate->add_flag("--no-overlays", eval_no_overlays,
                     "Skip overlay images");
  add_common(evaluate, common);

  // pour
  auto* pour = app.add_subcommand(
      "pour", "Pivot-rotation goal configuration from a solution");
  std::string pour_solution, pour_chain;
  std::vector<double> pour_pivot, pour_axis{0.0, 1.0, 0.0}, pour_q0;
  double pour_angle = 45.0;
  pour->add_option("solution", pour_solution, "Solution JSON")->required();
  pour->add_option("chain", pour_chain, "ChainSpec JSON")->required();
  pour->add_option("--pivot", pour_pivot,
                   "Pivot point in the object frame (x,y,z)")
      ->delimiter(',')
      ->required();
  pour->add_option("--axis", pour_axis, "Rotation axis in the base frame")
      ->delimiter(',');
  pour->add_option("--angle-deg", pour_angle, "Rotation angle in degrees");
  pour->add_option("--q0", pour_q0, "Seed configuration (comma separated)")
      ->delimiter(',')
      ->required();
  add_common(pour, common);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config(app, std::move(args));
    std::vector<const char*> cargv;
    cargv.push_back(argv[0]);
    for (const auto& a : args) {
      cargv.push_back(a.c_str());
    }
    app.parse(static_cast<int>(cargv.size()), cargv.data());
    common.seed_given = app.get_subcommands().front()
                            ->get_option("--seed")
                            ->count() > 0;

    if (simulate->parsed()) {
      return cmd_simulate(sim_spec, sim_out, common);
    }
    if (align->parsed()) {
      return cmd_align(align_manifest, align_out, conf_threshold, align_iters,
                       align_lr,
                       loss_thr_opt->count() > 0
                           ? std::optional<double>(loss_threshold_value)
                           : std::nullopt,
                       export_pose_clouds, common);
    }
    if (solve->parsed()) {
      return cmd_solve(solve_problem, solve_out, solve_method, solve_starts,
                       solve_iters,
                       init_alpha_opt->count() > 0
                           ? std::optional<double>(init_alpha_value)
                           : std::nullopt,
                       solve_rot_weight, solve_gt, solve_regressor_out,
                       common);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_solution, eval_testset, eval_report,
                          eval_problem, eval_method, eval_regressor,
                          eval_subsample, eval_no_overlays);
    }
    if (pour->parsed()) {
      return cmd_pour(pour_solution, pour_chain, pour_pivot, pour_axis,
                      pour_angle, pour_q0);
    }
    std::cerr << "no subcommand selected\n";
    return kExitInput;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  } catch (const DisconnectedGraph& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGraph;
  } catch (const Divergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IkFailure& e) {
    std::cerr << "error: " << e.what() << " (best residual "
              << fmt6(e.best_residual) << ")\n";
    return kExitIk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
