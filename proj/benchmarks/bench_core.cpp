#include <benchmark/benchmark.h>

#include <random>

#include "handkit/detection.hpp"
#include "handkit/fitting.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/losses.hpp"
#include "handkit/metrics.hpp"
#include "handkit/refine_sampler.hpp"

namespace {

using namespace handkit;

PoseParams random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Eigen::VectorXd v(48);
  for (auto& x : v) x = u(rng);
  return PoseParams(PoseEncoding::kAxisAngle, v);
}

const HandModelAssets& assets() {
  static const HandModelAssets a = synth_model(1, 778);
  return a;
}

void BM_ForwardKinematics(benchmark::State& state) {
  const auto model = synth_model(1, static_cast<int>(state.range(0)));
  std::mt19937_64 rng(1);
  const PoseParams pose = random_pose(rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward_kinematics(model, pose, ShapeParams{}));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardKinematics)->Arg(200)->Arg(778)->Arg(3000);

void BM_KeypointModel(benchmark::State& state) {
  const KeypointModel keypoints(assets());
  std::mt19937_64 rng(2);
  const PoseParams pose = random_pose(rng);
  for (auto _ : state) benchmark::DoNotOptimize(keypoints.evaluate(pose, ShapeParams{}));
}
BENCHMARK(BM_KeypointModel);

void BM_ObjectiveGradient(benchmark::State& state) {
  const BmcRanges ranges = default_ranges(assets());
  const KeypointModel keypoints(assets());
  Landmarks2D landmarks;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(60.0, 200.0);
  for (Eigen::Index i = 0; i < landmarks.points.rows(); ++i) landmarks.points.row(i) = Vec2(u(rng), u(rng)).transpose();
  FitProblem problem{assets(), keypoints, landmarks, ranges, nullptr, CameraKind::kWeakPerspective, FitWeights{}, 1.0,
                     0.0};
  problem.translation_unit = default_translation_unit(landmarks, keypoints, problem.camera_kind);
  const Eigen::VectorXd x = initialize_fit(landmarks, assets());
  const ScalarFunction f = [&](const Eigen::VectorXd& y) { return objective(y, problem); };
  for (auto _ : state) benchmark::DoNotOptimize(numeric_gradient(f, x, 1e-6));
}
BENCHMARK(BM_ObjectiveGradient)->Unit(benchmark::kMicrosecond);

void BM_Nms(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 400.0);
  std::uniform_real_distribution<double> size(10.0, 80.0);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::vector<Detection> dets;
  for (int i = 0; i < state.range(0); ++i) {
    const double x = pos(rng);
    const double y = pos(rng);
    dets.push_back(Detection{BBox{x, y, x + size(rng), y + size(rng)}, score(rng), i % 2 ? Side::kLeft : Side::kRight,
                             {}, {}});
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nms)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_BilinearSample(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap map = FeatureMap::constant(32, 32, 8.0, Eigen::VectorXd::Zero(64));
  for (auto& x : map.values.reshaped()) x = u(rng);
  std::uniform_real_distribution<double> uv(0.0, 256.0);
  const Vec2 p(uv(rng), uv(rng));
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_sample(map, p));
}
BENCHMARK(BM_BilinearSample);

void BM_SampleVertexFeatures(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap base = FeatureMap::constant(8, 8, 32.0, Eigen::VectorXd::Zero(16));
  for (auto& x : base.values.reshaped()) x = u(rng);
  const auto pyramid = build_pyramid(base);
  const auto mesh = forward_kinematics(assets(), random_pose(rng), ShapeParams{}).mesh;
  const WeakPerspectiveCamera cam{900.0, Vec2(128.0, 128.0)};
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(sample_vertex_features(mesh, cam, pyramid)));
}
BENCHMARK(BM_SampleVertexFeatures)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
