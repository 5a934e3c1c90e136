#pragma once

// Fits pose, shape and camera to 2D hand landmarks by minimizing
//
//   w_proj * L_proj + w_bmc * (L_bone + L_angle) + w_prior * L_prior
//
// with a first-order optimizer (Adam-style moments, rejection and step
// halving) driven by central-difference gradients. Within a stage the L1
// landmark term is first replaced by a smooth surrogate whose smoothing width
// shrinks to zero; the best point under the exact objective is kept.
//
// Packed parameter layout (61 values):
//   [0, 3)   camera: weak perspective (log scale, tx / unit, ty / unit) or
//            perspective (tx, ty, tz) / unit for a fixed intrinsic matrix
//   [3, 6)   global orientation, axis-angle
//   [6, 51)  finger joints 1..15, axis-angle
//   [51, 61) shape coefficients

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "handkit/camera.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/losses.hpp"
#include "handkit/pca_prior.hpp"

namespace handkit {

inline constexpr int kPackedCameraOffset = 0;
inline constexpr int kPackedGlobalOffset = 3;
inline constexpr int kPackedFingerOffset = 6;
inline constexpr int kPackedShapeOffset = 51;
inline constexpr int kPackedSize = 61;

enum class CameraKind { kWeakPerspective, kPerspective };

/// 21 detected landmarks (pixels) with 0/1 visibility.
struct Landmarks2D {
  Points2 points = Points2::Zero(kKeypointCount, 2);
  Eigen::VectorXi visibility = Eigen::VectorXi::Ones(kKeypointCount);
  std::optional<IntrinsicCamera> intrinsics;

  [[nodiscard]] int visible_count() const { return visibility.count(); }
};

/// Hand placement for a full-perspective fit: fixed intrinsics plus the root
/// translation in camera coordinates (meters).
struct PerspectiveCameraPose {
  IntrinsicCamera intrinsics;
  Vec3 translation = Vec3::Zero();
};

using FitCamera = std::variant<WeakPerspectiveCamera, PerspectiveCameraPose>;

/// Bit flags selecting parameter blocks optimized by a stage.
enum ParamBlock : unsigned {
  kBlockCamera = 1u << 0,
  kBlockGlobalOrientation = 1u << 1,
  kBlockFingerPose = 1u << 2,
  kBlockShape = 1u << 3,
  kBlockAll = kBlockCamera | kBlockGlobalOrientation | kBlockFingerPose | kBlockShape,
};

struct FitWeights {
  double proj = 1.0;
  double bmc = 1.0;
  double prior = 1.0;
};

struct FitConfig {
  FitWeights weights;
  int max_iters = 500;  // per stage
  double step_size = 1e-2;
  double convergence_tol = 1e-9;
  std::vector<unsigned> stage_schedule = {kBlockCamera | kBlockGlobalOrientation, kBlockAll};
  std::uint64_t seed = 0;
  /// Amplitude (radians) of seeded uniform noise added to the initial finger pose.
  double init_jitter = 0.0;
  double gradient_eps = 1e-6;
  CameraKind camera_kind = CameraKind::kWeakPerspective;
  /// Packed starting point (see pack_params); initialize_fit is used when absent.
  std::optional<Eigen::VectorXd> initial_params;

  /// Throws Errc::kInvalidConfig.
  void validate() const;
};

struct FitResult {
  PoseParams pose = PoseParams::identity();
  ShapeParams shape;
  FitCamera camera = WeakPerspectiveCamera{};
  Eigen::VectorXd packed;
  double initial_objective = 0.0;
  /// Best exact objective after every iteration of every stage, so the
  /// sequence never increases.
  std::vector<double> objective_trace;
  /// Mean L1 landmark error in pixels at the returned parameters.
  double reprojection_error = 0.0;
  bool converged = false;
  int iterations_used = 0;
};

/// Everything the objective needs besides the packed vector. References must
/// outlive the problem.
struct FitProblem {
  const HandModelAssets& assets;
  const KeypointModel& keypoints;
  const Landmarks2D& landmarks;
  const BmcRanges& ranges;
  const PcaPrior* prior = nullptr;
  CameraKind camera_kind = CameraKind::kWeakPerspective;
  FitWeights weights;
  double translation_unit = 1.0;
  /// Pixels; when positive the landmark term uses sqrt(r^2 + d^2) - d per
  /// coordinate instead of |r|. The optimizer sets it internally.
  double proj_smoothing = 0.0;
};

struct ObjectiveTerms {
  double proj = 0.0;
  double bone = 0.0;
  double angle = 0.0;
  double prior = 0.0;
  double total = 0.0;
};

struct UnpackedParams {
  PoseParams pose = PoseParams::identity();
  ShapeParams shape;
  FitCamera camera = WeakPerspectiveCamera{};
};

[[nodiscard]] UnpackedParams unpack_params(const Eigen::VectorXd& packed, const FitProblem& problem);
[[nodiscard]] Eigen::VectorXd pack_params(const UnpackedParams& params, const FitProblem& problem);

/// Landmark-derived length that normalizes packed translations: the 2D
/// bounding-box diagonal of visible landmarks (weak perspective) or the rest
/// 3D joint diagonal (perspective).
[[nodiscard]] double default_translation_unit(const Landmarks2D& landmarks,
                                              const KeypointModel& keypoints, CameraKind kind);

/// Projects the model keypoints for `params` into the image.
[[nodiscard]] Points2 project_keypoints(const UnpackedParams& params, const KeypointModel& keypoints);

[[nodiscard]] ObjectiveTerms objective_terms(const Eigen::VectorXd& packed, const FitProblem& problem);
[[nodiscard]] double objective(const Eigen::VectorXd& packed, const FitProblem& problem);

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Central differences per coordinate. Throws Errc::kEvaluation naming the
/// coordinate whose evaluation was not finite.
[[nodiscard]] Eigen::VectorXd numeric_gradient(const ScalarFunction& f, const Eigen::VectorXd& x,
                                               double eps);

/// Identity pose, zero shape, camera from landmark extent and centroid.
/// Throws Errc::kInsufficientLandmarks (< 4 visible) or
/// Errc::kDegenerateLandmarks (visible landmarks coincide).
[[nodiscard]] Eigen::VectorXd initialize_fit(const Landmarks2D& landmarks,
                                             const HandModelAssets& assets,
                                             CameraKind kind = CameraKind::kWeakPerspective);

/// Runs the stage schedule and returns the best parameters seen.
[[nodiscard]] FitResult fit_hand(const Landmarks2D& landmarks, const HandModelAssets& assets,
                                 const PcaPrior* prior, const BmcRanges& ranges,
                                 const FitConfig& config);

}  // namespace handkit
