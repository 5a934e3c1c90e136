#pragma once

// Feature pyramids sampled at projected mesh vertices, aggregation of the
// sampled features and additive pose/shape residual updates.
//
// Cell (i, j) of a map with pixel stride s is centered at pixel
// ((j + 0.5) s, (i + 0.5) s).

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "handkit/camera.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit {

/// H x W x C values stored with row c = i * width + j.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  double stride = 1.0;  // pixels per cell
  Eigen::MatrixXd values;

  [[nodiscard]] static FeatureMap constant(int height, int width, double stride, const Eigen::VectorXd& value);

  [[nodiscard]] auto cell(int i, int j) const { return values.row(i * width + j); }
  /// Throws Errc::kInvalidArgument.
  void validate() const;
};

/// Coarse to fine.
struct FeaturePyramid {
  std::vector<FeatureMap> levels;

  [[nodiscard]] int total_channels() const;
  /// Levels valid, non-empty, resolution strictly increasing.
  void validate() const;
};

enum class BorderMode { kClamp, kZeros };

[[nodiscard]] Eigen::VectorXd bilinear_sample(const FeatureMap& map, const Vec2& uv,
                                              BorderMode mode = BorderMode::kClamp);

inline constexpr int kDefaultExtraLevels = 2;

/// Each extra level doubles H and W, halves the stride and takes its values by
/// bilinear sampling of the previous level at the new cell centers.
[[nodiscard]] FeaturePyramid build_pyramid(const FeatureMap& base, int extra_levels = kDefaultExtraLevels);

/// V x (sum of channels), coarse levels first.
[[nodiscard]] Eigen::MatrixXd sample_vertex_features(const HandMesh& mesh, const WeakPerspectiveCamera& cam,
                                                     const FeaturePyramid& pyramid,
                                                     BorderMode mode = BorderMode::kClamp);

enum class AggregateKind { kMean, kMax, kSum };

[[nodiscard]] const char* aggregate_name(AggregateKind kind);
/// "mean", "max" or "sum"; throws Errc::kInvalidArgument otherwise.
[[nodiscard]] AggregateKind parse_aggregate(std::string_view text);

/// Columnwise reduction. Throws Errc::kEmptyInput for zero rows.
[[nodiscard]] Eigen::VectorXd aggregate(const Eigen::MatrixXd& features, AggregateKind kind = AggregateKind::kMean);

struct RefineState {
  PoseParams pose = PoseParams::identity();
  ShapeParams shape;
  WeakPerspectiveCamera camera;
};

struct Residual {
  PoseParams pose_delta = PoseParams(PoseEncoding::kAxisAngle, Eigen::VectorXd::Zero(pose_size(PoseEncoding::kAxisAngle)));
  ShapeVector shape_delta = ShapeVector::Zero();
};

/// Affine map from an aggregated feature vector to pose and shape residuals:
/// output = weight * features + bias, pose values first, then 10 shape values.
class ResidualRegressor {
 public:
  ResidualRegressor(PoseEncoding encoding, Eigen::MatrixXd weight, Eigen::VectorXd bias);

  /// All-zero map; refine_step with it leaves the state unchanged.
  [[nodiscard]] static ResidualRegressor zero(PoseEncoding encoding, int input_dim);

  [[nodiscard]] PoseEncoding encoding() const noexcept { return encoding_; }
  [[nodiscard]] int input_dim() const noexcept { return static_cast<int>(weight_.cols()); }
  [[nodiscard]] const Eigen::MatrixXd& weight() const noexcept { return weight_; }
  [[nodiscard]] const Eigen::VectorXd& bias() const noexcept { return bias_; }

  /// Throws Errc::kInvalidArgument on a feature length mismatch.
  [[nodiscard]] Residual predict(const Eigen::VectorXd& features) const;

 private:
  PoseEncoding encoding_;
  Eigen::MatrixXd weight_;
  Eigen::VectorXd bias_;
};

/// Throws Errc::kInvalidArgument when the pose delta encoding differs from
/// the state's.
[[nodiscard]] RefineState apply_residual(const RefineState& state, const PoseParams& pose_delta,
                                         const ShapeVector& shape_delta);

/// Forward kinematics, vertex sampling, aggregation, regression and residual
/// update.
[[nodiscard]] RefineState refine_step(const RefineState& state, const HandModelAssets& assets,
                                      const FeaturePyramid& pyramid, const ResidualRegressor& regressor,
                                      AggregateKind kind = AggregateKind::kMean);

// Feature map container "featuremap": META (1 x 4: H W C stride), DATA
// (H*W x C). Regressor container "regressor": WEIGHT, BIAS; the pose encoding
// is implied by the output size (58 axis-angle, 106 rot6d).
[[nodiscard]] SectionedFile feature_map_to_sectioned(const FeatureMap& map);
[[nodiscard]] FeatureMap feature_map_from_sectioned(const SectionedFile& file);
[[nodiscard]] FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);

[[nodiscard]] SectionedFile regressor_to_sectioned(const ResidualRegressor& regressor);
[[nodiscard]] ResidualRegressor regressor_from_sectioned(const SectionedFile& file);
[[nodiscard]] ResidualRegressor load_regressor(const std::filesystem::path& path);
void save_regressor(const ResidualRegressor& regressor, const std::filesystem::path& path);

}  // namespace handkit
