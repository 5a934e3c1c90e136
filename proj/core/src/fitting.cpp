#include "handkit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "handkit/error.hpp"
#include "random.hpp"

namespace handkit {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-12;
constexpr int kMaxHalvings = 30;
constexpr int kSmallDecreaseStreak = 5;
// Iterations without the best exact objective improving by the tolerance.
constexpr int kStaleBestLimit = 50;
// The L1 landmark term is replaced by sqrt(r^2 + d^2) - d while descending,
// with d shrinking from kFirstSmoothing to kLastSmoothing times the landmark
// extent and a final pass on the exact objective. The smooth surrogate keeps
// the descent moving along kinks where several residuals vanish at once.
constexpr double kFirstSmoothing = 1e-2;
constexpr double kLastSmoothing = 1e-8;
constexpr double kSmoothingDecay = 1e-2;

struct BoundingBox2 {
  Vec2 lo;
  Vec2 hi;
  Vec2 centroid;
};

BoundingBox2 visible_extent(const Points2& points, const Eigen::VectorXi& visibility) {
  BoundingBox2 box{Vec2::Constant(std::numeric_limits<double>::infinity()),
                   Vec2::Constant(-std::numeric_limits<double>::infinity()), Vec2::Zero()};
  int n = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (visibility[i] == 0) continue;
    const Vec2 p = points.row(i).transpose();
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
    box.centroid += p;
    ++n;
  }
  if (n > 0) box.centroid /= n;
  return box;
}

void check_landmarks(const Landmarks2D& landmarks) {
  if (landmarks.points.rows() != kKeypointCount || landmarks.visibility.size() != kKeypointCount) {
    fail(Errc::kInvalidArgument, "landmarks must have 21 rows");
  }
  if (!landmarks.points.allFinite()) fail(Errc::kInvalidArgument, "landmarks are not finite");
  if (landmarks.visible_count() < 4) {
    fail(Errc::kInsufficientLandmarks,
         std::to_string(landmarks.visible_count()) + " visible landmarks; at least 4 are required");
  }
}

const IntrinsicCamera& require_intrinsics(const Landmarks2D& landmarks) {
  if (!landmarks.intrinsics) {
    fail(Errc::kInvalidArgument, "a perspective fit needs landmark intrinsics");
  }
  return *landmarks.intrinsics;
}

Eigen::VectorXd initial_params(const Landmarks2D& landmarks, const KeypointModel& keypoints,
                               CameraKind kind, double unit) {
  check_landmarks(landmarks);
  const BoundingBox2 box2 = visible_extent(landmarks.points, landmarks.visibility);
  const double diag2 = (box2.hi - box2.lo).norm();
  if (!(diag2 > 1e-9)) fail(Errc::kDegenerateLandmarks, "visible landmarks coincide");

  const Keypoints3 rest = keypoints.evaluate(PoseParams::identity(), ShapeParams{}).joints;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 centroid = Vec3::Zero();
  int n = 0;
  for (int i = 0; i < kKeypointCount; ++i) {
    if (landmarks.visibility[i] == 0) continue;
    const Vec3 p = rest.row(i).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    centroid += p;
    ++n;
  }
  centroid /= n;
  const double diag3 = (hi - lo).norm();
  if (!(diag3 > 0.0)) fail(Errc::kDegenerateLandmarks, "visible model keypoints coincide at rest");

  Eigen::VectorXd x = Eigen::VectorXd::Zero(kPackedSize);
  if (kind == CameraKind::kWeakPerspective) {
    const double scale = diag2 / diag3;
    const Vec2 t = box2.centroid - scale * centroid.head<2>();
    x[0] = std::log(scale);
    x[1] = t.x() / unit;
    x[2] = t.y() / unit;
  } else {
    const auto& k = require_intrinsics(landmarks);
    const double depth = 0.5 * (k.fx + k.fy) * diag3 / diag2;
    const Vec3 t((box2.centroid.x() - k.cx) * depth / k.fx - centroid.x(),
                 (box2.centroid.y() - k.cy) * depth / k.fy - centroid.y(), depth - centroid.z());
    x.head<3>() = t / unit;
  }
  return x;
}

double smoothed_reprojection(const Points2& projected, const Landmarks2D& landmarks, double delta) {
  double sum = 0.0;
  int visible = 0;
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    if (landmarks.visibility[i] == 0) continue;
    for (int c = 0; c < 2; ++c) {
      const double r = projected(i, c) - landmarks.points(i, c);
      sum += std::sqrt(r * r + delta * delta) - delta;
    }
    ++visible;
  }
  return visible == 0 ? 0.0 : sum / visible;
}

double safe_objective(const Eigen::VectorXd& x, const FitProblem& problem) {
  try {
    const double v = objective(x, problem);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::vector<int> active_indices(unsigned blocks) {
  std::vector<int> idx;
  const auto add = [&](int first, int last) {
    for (int i = first; i < last; ++i) idx.push_back(i);
  };
  if (blocks & kBlockCamera) add(kPackedCameraOffset, kPackedGlobalOffset);
  if (blocks & kBlockGlobalOrientation) add(kPackedGlobalOffset, kPackedFingerOffset);
  if (blocks & kBlockFingerPose) add(kPackedFingerOffset, kPackedShapeOffset);
  if (blocks & kBlockShape) add(kPackedShapeOffset, kPackedSize);
  return idx;
}

class StageRunner {
 public:
  StageRunner(const FitProblem& problem, const FitConfig& config, unsigned blocks)
      : problem_(problem), config_(config), active_(active_indices(blocks)) {}

  /// Runs the stage from `x`; on return `x` and `fx` hold the best point seen
  /// under the exact objective. Returns whether the stage converged before
  /// exhausting its iterations.
  bool run(Eigen::VectorXd& x, double& fx, FitResult& result) {
    Eigen::VectorXd best = x;
    double best_f = fx;
    int budget = config_.max_iters;

    const double scale = pixel_extent(problem_.landmarks);
    std::vector<double> deltas;
    for (double d = kFirstSmoothing * scale; d >= kLastSmoothing * scale; d *= kSmoothingDecay) deltas.push_back(d);
    deltas.push_back(0.0);

    for (double delta : deltas) {
      FitProblem phase = problem_;
      phase.proj_smoothing = delta;
      const Phase outcome = descend(phase, x, budget, best, best_f, result);
      if (best_f == 0.0) break;
      if (outcome == Phase::kOutOfIterations) {
        x = best;
        fx = best_f;
        return false;
      }
    }
    x = best;
    fx = best_f;
    return true;
  }

 private:
  enum class Phase { kStalled, kOutOfIterations };

  struct Step {
    bool accepted = false;
    Eigen::VectorXd x;
    double value = 0.0;
    double length = 0.0;
  };

  static double pixel_extent(const Landmarks2D& landmarks) {
    const BoundingBox2 box = visible_extent(landmarks.points, landmarks.visibility);
    const double diag = (box.hi - box.lo).norm();
    return std::isfinite(diag) && diag > 0.0 ? diag : 1.0;
  }

  /// Adam-style descent on `phase` until no strict decrease is found, the
  /// decrease stays below the tolerance, the best exact objective stops
  /// improving, or the budget runs out.
  Phase descend(const FitProblem& phase, Eigen::VectorXd& x, int& budget, Eigen::VectorXd& best, double& best_f,
                FitResult& result) const {
    const auto n = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    int t = 0;
    double lr = config_.step_size;
    int small_streak = 0;
    int stale_best = 0;
    double fx = objective(x, phase);

    while (budget > 0) {
      if (fx == 0.0) return Phase::kStalled;
      const Eigen::VectorXd g = gradient(phase, x, config_.gradient_eps);
      ++t;
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(kAdamBeta1, t);
      const double c2 = 1.0 - std::pow(kAdamBeta2, t);
      const Eigen::VectorXd direction = (m / c1).array() / ((v / c2).array().sqrt() + kAdamEps);

      Step step = line_search(phase, x, fx, direction, lr);
      if (!step.accepted) {
        // Stale moments: retry once along the normalized raw gradient.
        m.setZero();
        v.setZero();
        t = 0;
        const double gmax = g.cwiseAbs().maxCoeff();
        if (gmax > 0.0) step = line_search(phase, x, fx, g / gmax, config_.step_size);
      }

      --budget;
      ++result.iterations_used;
      if (!step.accepted) {
        result.objective_trace.push_back(best_f);
        return Phase::kStalled;
      }
      const double decrease = fx - step.value;
      x = std::move(step.x);
      fx = step.value;
      lr = std::min(config_.step_size, 2.0 * step.length);

      const double exact = phase.proj_smoothing > 0.0 ? safe_objective(x, problem_) : fx;
      stale_best = exact < best_f - config_.convergence_tol ? 0 : stale_best + 1;
      if (exact < best_f) {
        best = x;
        best_f = exact;
      }
      result.objective_trace.push_back(best_f);

      small_streak = decrease < config_.convergence_tol ? small_streak + 1 : 0;
      if (small_streak >= kSmallDecreaseStreak || stale_best >= kStaleBestLimit) return Phase::kStalled;
    }
    return Phase::kOutOfIterations;
  }

  Eigen::VectorXd gradient(const FitProblem& phase, const Eigen::VectorXd& x, double h) const {
    const auto n = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd g(n);
    Eigen::VectorXd probe = x;
    for (Eigen::Index k = 0; k < n; ++k) {
      const int i = active_[static_cast<std::size_t>(k)];
      const double xi = x[i];
      probe[i] = xi + h;
      const double fp = objective(probe, phase);
      probe[i] = xi - h;
      const double fm = objective(probe, phase);
      probe[i] = xi;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        fail(Errc::kEvaluation, "objective not finite around coordinate " + std::to_string(i));
      }
      g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  /// Moves against `direction` from `length`, halving until the objective
  /// strictly decreases.
  Step line_search(const FitProblem& phase, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& direction,
                   double length) const {
    Step step{false, x, fx, length};
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
      for (std::size_t k = 0; k < active_.size(); ++k) {
        const int i = active_[k];
        step.x[i] = x[i] - step.length * direction[static_cast<Eigen::Index>(k)];
      }
      step.value = safe_objective(step.x, phase);
      if (step.value < fx) {
        step.accepted = true;
        return step;
      }
      step.length *= 0.5;
    }
    return step;
  }

  const FitProblem& problem_;
  const FitConfig& config_;
  std::vector<int> active_;
};

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 1) fail(Errc::kInvalidConfig, "max_iters must be at least 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) fail(Errc::kInvalidConfig, "step_size must be positive");
  if (!(convergence_tol > 0.0)) fail(Errc::kInvalidConfig, "convergence_tol must be positive");
  if (!(gradient_eps > 0.0)) fail(Errc::kInvalidConfig, "gradient_eps must be positive");
  if (!(weights.proj >= 0.0 && weights.bmc >= 0.0 && weights.prior >= 0.0)) {
    fail(Errc::kInvalidConfig, "fit weights must be non-negative");
  }
  if (!(init_jitter >= 0.0)) fail(Errc::kInvalidConfig, "init_jitter must be non-negative");
  if (initial_params && initial_params->size() != kPackedSize) {
    fail(Errc::kInvalidConfig, "initial parameters must have " + std::to_string(kPackedSize) + " values");
  }
  if (stage_schedule.empty()) fail(Errc::kInvalidConfig, "stage schedule is empty");
  for (unsigned s : stage_schedule) {
    if (s == 0 || (s & ~static_cast<unsigned>(kBlockAll)) != 0) {
      fail(Errc::kInvalidConfig, "stage selects no valid parameter block");
    }
  }
}

UnpackedParams unpack_params(const Eigen::VectorXd& packed, const FitProblem& problem) {
  if (packed.size() != kPackedSize) {
    fail(Errc::kInvalidArgument, "packed parameter vector has " + std::to_string(packed.size()) +
                                     " values, expected " + std::to_string(kPackedSize));
  }
  UnpackedParams out{PoseParams(PoseEncoding::kAxisAngle, packed.segment(kPackedGlobalOffset, 48)),
                     ShapeParams{packed.segment<kShapeCount>(kPackedShapeOffset)},
                     WeakPerspectiveCamera{}};
  if (problem.camera_kind == CameraKind::kWeakPerspective) {
    out.camera = WeakPerspectiveCamera{std::exp(packed[0]),
                                       problem.translation_unit * packed.segment<2>(1)};
  } else {
    out.camera = PerspectiveCameraPose{require_intrinsics(problem.landmarks),
                                       problem.translation_unit * packed.head<3>()};
  }
  return out;
}

Eigen::VectorXd pack_params(const UnpackedParams& params, const FitProblem& problem) {
  Eigen::VectorXd x(kPackedSize);
  x.segment(kPackedGlobalOffset, 48) = params.pose.to_encoding(PoseEncoding::kAxisAngle).values();
  x.segment<kShapeCount>(kPackedShapeOffset) = params.shape.beta;
  if (const auto* weak = std::get_if<WeakPerspectiveCamera>(&params.camera)) {
    weak->validate();
    x[0] = std::log(weak->scale);
    x.segment<2>(1) = weak->translation / problem.translation_unit;
  } else {
    x.head<3>() = std::get<PerspectiveCameraPose>(params.camera).translation / problem.translation_unit;
  }
  return x;
}

double default_translation_unit(const Landmarks2D& landmarks, const KeypointModel& keypoints,
                                CameraKind kind) {
  if (kind == CameraKind::kWeakPerspective) {
    const BoundingBox2 box = visible_extent(landmarks.points, landmarks.visibility);
    const double diag = (box.hi - box.lo).norm();
    return std::isfinite(diag) && diag > 1e-9 ? diag : 1.0;
  }
  const Keypoints3 rest = keypoints.evaluate(PoseParams::identity(), ShapeParams{}).joints;
  const double diag = (rest.colwise().maxCoeff() - rest.colwise().minCoeff()).norm();
  return diag > 0.0 ? diag : 1.0;
}

Points2 project_keypoints(const UnpackedParams& params, const KeypointModel& keypoints) {
  const Keypoints3 joints = keypoints.evaluate(params.pose, params.shape).joints;
  if (const auto* weak = std::get_if<WeakPerspectiveCamera>(&params.camera)) {
    return project_weak(joints, *weak);
  }
  const auto& cam = std::get<PerspectiveCameraPose>(params.camera);
  Points3 placed = joints;
  placed.rowwise() += cam.translation.transpose();
  return project_perspective(placed, cam.intrinsics);
}

ObjectiveTerms objective_terms(const Eigen::VectorXd& packed, const FitProblem& problem) {
  const UnpackedParams params = unpack_params(packed, problem);
  const JointPositions joints = problem.keypoints.evaluate(params.pose, params.shape);

  Points2 projected;
  if (const auto* weak = std::get_if<WeakPerspectiveCamera>(&params.camera)) {
    projected = project_weak(joints.joints, *weak);
  } else {
    const auto& cam = std::get<PerspectiveCameraPose>(params.camera);
    Points3 placed = joints.joints;
    placed.rowwise() += cam.translation.transpose();
    projected = project_perspective(placed, cam.intrinsics);
  }

  ObjectiveTerms t;
  if (problem.proj_smoothing > 0.0) {
    t.proj = smoothed_reprojection(projected, problem.landmarks, problem.proj_smoothing);
  } else {
    t.proj = reprojection_loss(projected, problem.landmarks.points, problem.landmarks.visibility);
  }
  if (problem.weights.bmc != 0.0) {
    t.bone = bone_length_loss(bone_lengths(joints, problem.keypoints.tree()), problem.ranges);
    t.angle = joint_angle_loss(params.pose, problem.ranges);
  }
  if (problem.prior != nullptr && problem.weights.prior != 0.0) {
    const auto mesh = forward_kinematics(problem.assets, params.pose, params.shape).mesh;
    t.prior = pca_prior_loss(flatten_points(mesh.vertices), *problem.prior);
  }
  t.total = problem.weights.proj * t.proj + problem.weights.bmc * (t.bone + t.angle) +
            problem.weights.prior * t.prior;
  return t;
}

double objective(const Eigen::VectorXd& packed, const FitProblem& problem) {
  return objective_terms(packed, problem).total;
}

Eigen::VectorXd numeric_gradient(const ScalarFunction& f, const Eigen::VectorXd& x, double eps) {
  if (!(eps > 0.0)) fail(Errc::kInvalidArgument, "finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double fp = f(probe);
    probe[i] = x[i] - eps;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(Errc::kEvaluation, "function not finite around coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

Eigen::VectorXd initialize_fit(const Landmarks2D& landmarks, const HandModelAssets& assets,
                               CameraKind kind) {
  check_landmarks(landmarks);
  const KeypointModel keypoints(assets);
  return initial_params(landmarks, keypoints, kind,
                        default_translation_unit(landmarks, keypoints, kind));
}

FitResult fit_hand(const Landmarks2D& landmarks, const HandModelAssets& assets,
                   const PcaPrior* prior, const BmcRanges& ranges, const FitConfig& config) {
  config.validate();
  check_landmarks(landmarks);
  ranges.validate();
  assets.validate();
  if (prior != nullptr && prior->dimension() != 3 * assets.vertex_count()) {
    fail(Errc::kInvalidArgument, "prior dimension does not match the model");
  }

  const KeypointModel keypoints(assets);
  const double unit = default_translation_unit(landmarks, keypoints, config.camera_kind);
  const FitProblem problem{assets, keypoints, landmarks, ranges, prior, config.camera_kind,
                           config.weights, unit};

  Eigen::VectorXd x = config.initial_params ? *config.initial_params
                                            : initial_params(landmarks, keypoints, config.camera_kind, unit);
  if (config.init_jitter > 0.0) {
    detail::Rng rng(config.seed);
    for (int i = kPackedFingerOffset; i < kPackedShapeOffset; ++i) {
      x[i] += rng.uniform(-config.init_jitter, config.init_jitter);
    }
  }

  double fx = 0.0;
  try {
    fx = objective(x, problem);
  } catch (const Error& e) {
    fail(Errc::kInitialization, std::string("objective failed at initialization: ") + e.what());
  }
  if (!std::isfinite(fx)) fail(Errc::kInitialization, "objective is not finite at initialization");

  FitResult result;
  result.initial_objective = fx;
  bool converged = false;
  for (unsigned blocks : config.stage_schedule) {
    converged = StageRunner(problem, config, blocks).run(x, fx, result);
  }
  result.converged = converged;

  const UnpackedParams params = unpack_params(x, problem);
  result.pose = params.pose;
  result.shape = params.shape;
  result.camera = params.camera;
  result.packed = x;
  result.reprojection_error = objective_terms(x, problem).proj;
  return result;
}

}  // namespace handkit
