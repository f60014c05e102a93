#include <benchmark/benchmark.h>

#include <graspalign/coord_align.hpp>
#include <graspalign/detail/rng.hpp>
#include <graspalign/global_align.hpp>
#include <graspalign/kinematics.hpp>
#include <graspalign/metrics.hpp>
#include <graspalign/synth.hpp>

using namespace graspalign;

namespace {

Mat3 near_rotation(uint64_t seed) {
  detail::Rng rng(seed);
  return Rotation3::about_axis(rng.unit_vector(), rng.uniform(0.0, M_PI))
             .matrix() +
         0.01 * Mat3::Random();
}

const ScenarioOutputs& scenario_outputs() {
  static const ScenarioOutputs outputs = [] {
    ScenarioSpec spec;
    spec.seed = 1;
    spec.kind = ObjectKind::kHammer;
    spec.n_train = 9;
    spec.n_test = 2;
    spec.raster_width = 10;
    spec.raster_height = 8;
    spec.object_params.target_points = 4000;
    return generate(build_scenario(spec));
  }();
  return outputs;
}

}  // namespace

static void BM_ProcrustesProject(benchmark::State& state) {
  const Mat3 m = near_rotation(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(procrustes_project(m));
  }
}
BENCHMARK(BM_ProcrustesProject);

static void BM_ProcrustesAdjoint(benchmark::State& state) {
  const ProcrustesDerivative proc(near_rotation(5));
  const Mat3 grad = 0.1 * Mat3::Random();
  for (auto _ : state) {
    benchmark::DoNotOptimize(proc.adjoint(grad));
  }
}
BENCHMARK(BM_ProcrustesAdjoint);

static void BM_CoordinateLoss(benchmark::State& state) {
  const auto& outputs = scenario_outputs();
  const CoordObjective objective(outputs.problem,
                                 static_cast<int>(state.range(0)));
  const VecX params =
      objective.pack(outputs.truth.H_true, outputs.truth.alpha_true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective.loss(params));
  }
  state.SetComplexityN(objective.sample_count());
}
BENCHMARK(BM_CoordinateLoss)->Arg(1)->Arg(8);

static void BM_CoordinateLossAndGrad(benchmark::State& state) {
  const auto& outputs = scenario_outputs();
  const CoordObjective objective(outputs.problem,
                                 static_cast<int>(state.range(0)));
  const VecX params =
      objective.pack(outputs.truth.H_true, outputs.truth.alpha_true);
  VecX grad(CoordObjective::kParamCount);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective.loss_and_grad(params, grad));
  }
}
BENCHMARK(BM_CoordinateLossAndGrad)->Arg(1)->Arg(8);

static void BM_AlignmentLossAndGrad(benchmark::State& state) {
  const auto& outputs = scenario_outputs();
  const AlignmentObjective objective(outputs.pairs, true);
  const VecX params = objective.pack(objective.initial_guess());
  VecX grad(objective.param_count());
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective.loss_and_grad(params, grad));
  }
}
BENCHMARK(BM_AlignmentLossAndGrad);

static void BM_AvgMinDistance(benchmark::State& state) {
  detail::Rng rng(11);
  PixelSet a, b;
  a.points.resize(state.range(0), 2);
  b.points.resize(state.range(0), 2);
  for (Eigen::Index i = 0; i < state.range(0); ++i) {
    a.points.row(i) << rng.uniform(0, 640), rng.uniform(0, 480);
    b.points.row(i) << rng.uniform(0, 640), rng.uniform(0, 480);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(avg_min_distance(a, b));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AvgMinDistance)->Range(64, 16384)->Complexity();

static void BM_ForwardKinematics(benchmark::State& state) {
  const ChainSpec chain = default_chain();
  Configuration q(6);
  q << 0.3, 0.5, -0.8, 0.2, 0.4, -0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fk(chain, q));
  }
}
BENCHMARK(BM_ForwardKinematics);

static void BM_InverseKinematics(benchmark::State& state) {
  const ChainSpec chain = default_chain();
  Configuration q(6);
  q << 0.3, 0.5, -0.8, 0.2, 0.4, -0.1;
  const Transform3 target = fk(chain, q);
  Configuration q0 = q;
  q0.array() += 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ik(chain, target, q0));
  }
}
BENCHMARK(BM_InverseKinematics);

BENCHMARK_MAIN();
