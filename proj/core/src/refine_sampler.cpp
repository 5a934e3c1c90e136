#include "handkit/refine_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handkit/error.hpp"

namespace handkit {
namespace {

constexpr int kMaxMapCells = 1 << 26;

void check_finite_uv(const Vec2& uv) {
  if (!uv.allFinite()) fail(Errc::kInvalidArgument, "sample position is not finite");
}

}  // namespace

FeatureMap FeatureMap::constant(int height, int width, double stride, const Eigen::VectorXd& value) {
  FeatureMap map{height, width, static_cast<int>(value.size()), stride, {}};
  if (height <= 0 || width <= 0) fail(Errc::kInvalidArgument, "feature map dimensions must be positive");
  map.values = value.transpose().replicate(static_cast<Eigen::Index>(height) * width, 1);
  return map;
}

void FeatureMap::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) {
    fail(Errc::kInvalidArgument, "feature map dimensions must be positive");
  }
  if (static_cast<long long>(height) * width > kMaxMapCells) fail(Errc::kInvalidArgument, "feature map too large");
  if (!(stride > 0.0) || !std::isfinite(stride)) fail(Errc::kInvalidArgument, "feature map stride must be positive");
  if (values.rows() != static_cast<Eigen::Index>(height) * width || values.cols() != channels) {
    fail(Errc::kInvalidArgument, "feature map values must be " + std::to_string(height * width) + " x " +
                                     std::to_string(channels));
  }
  if (!values.allFinite()) fail(Errc::kInvalidArgument, "feature map values are not finite");
}

int FeaturePyramid::total_channels() const {
  int c = 0;
  for (const auto& l : levels) c += l.channels;
  return c;
}

void FeaturePyramid::validate() const {
  if (levels.empty()) fail(Errc::kInvalidArgument, "feature pyramid has no levels");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    levels[k].validate();
    if (k > 0 && (levels[k].height <= levels[k - 1].height || levels[k].width <= levels[k - 1].width)) {
      fail(Errc::kInvalidArgument, "pyramid level " + std::to_string(k) + " is not finer than its predecessor");
    }
  }
}

Eigen::VectorXd bilinear_sample(const FeatureMap& map, const Vec2& uv, BorderMode mode) {
  check_finite_uv(uv);
  double x = uv.x() / map.stride - 0.5;
  double y = uv.y() / map.stride - 0.5;

  if (mode == BorderMode::kClamp) {
    x = std::clamp(x, 0.0, static_cast<double>(map.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(map.height - 1));
    const int j0 = map.width > 1 ? std::min(static_cast<int>(std::floor(x)), map.width - 2) : 0;
    const int i0 = map.height > 1 ? std::min(static_cast<int>(std::floor(y)), map.height - 2) : 0;
    const int j1 = std::min(j0 + 1, map.width - 1);
    const int i1 = std::min(i0 + 1, map.height - 1);
    const double fx = x - j0;
    const double fy = y - i0;
    return ((1.0 - fy) * ((1.0 - fx) * map.cell(i0, j0) + fx * map.cell(i0, j1)) +
            fy * ((1.0 - fx) * map.cell(i1, j0) + fx * map.cell(i1, j1)))
        .transpose();
  }

  const double fj = std::floor(x);
  const double fi = std::floor(y);
  const double fx = x - fj;
  const double fy = y - fi;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(map.channels);
  const auto add = [&](double i, double j, double w) {
    if (w == 0.0 || i < 0.0 || j < 0.0 || i >= map.height || j >= map.width) return;
    out += w * map.cell(static_cast<int>(i), static_cast<int>(j)).transpose();
  };
  add(fi, fj, (1.0 - fy) * (1.0 - fx));
  add(fi, fj + 1.0, (1.0 - fy) * fx);
  add(fi + 1.0, fj, fy * (1.0 - fx));
  add(fi + 1.0, fj + 1.0, fy * fx);
  return out;
}

FeaturePyramid build_pyramid(const FeatureMap& base, int extra_levels) {
  if (extra_levels < 0) fail(Errc::kInvalidArgument, "extra pyramid levels must be non-negative");
  base.validate();
  FeaturePyramid pyr;
  pyr.levels.push_back(base);
  for (int k = 0; k < extra_levels; ++k) {
    const FeatureMap& prev = pyr.levels.back();
    FeatureMap next{prev.height * 2, prev.width * 2, prev.channels, prev.stride * 0.5, {}};
    if (static_cast<long long>(next.height) * next.width > kMaxMapCells) {
      fail(Errc::kInvalidArgument, "feature pyramid too large");
    }
    next.values.resize(static_cast<Eigen::Index>(next.height) * next.width, next.channels);
    for (int i = 0; i < next.height; ++i) {
      for (int j = 0; j < next.width; ++j) {
        const Vec2 center((j + 0.5) * next.stride, (i + 0.5) * next.stride);
        next.values.row(i * next.width + j) = bilinear_sample(prev, center).transpose();
      }
    }
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

Eigen::MatrixXd sample_vertex_features(const HandMesh& mesh, const WeakPerspectiveCamera& cam,
                                       const FeaturePyramid& pyramid, BorderMode mode) {
  pyramid.validate();
  const Points2 uv = project_weak(mesh.vertices, cam);
  Eigen::MatrixXd out(mesh.vertices.rows(), pyramid.total_channels());
  for (Eigen::Index v = 0; v < uv.rows(); ++v) {
    int col = 0;
    for (const auto& level : pyramid.levels) {
      out.row(v).segment(col, level.channels) = bilinear_sample(level, uv.row(v).transpose(), mode).transpose();
      col += level.channels;
    }
  }
  return out;
}

const char* aggregate_name(AggregateKind kind) {
  switch (kind) {
    case AggregateKind::kMean:
      return "mean";
    case AggregateKind::kMax:
      return "max";
    case AggregateKind::kSum:
      return "sum";
  }
  return "mean";
}

AggregateKind parse_aggregate(std::string_view text) {
  if (text == "mean") return AggregateKind::kMean;
  if (text == "max") return AggregateKind::kMax;
  if (text == "sum") return AggregateKind::kSum;
  fail(Errc::kInvalidArgument, "unknown aggregation '" + std::string(text) + "'");
}

Eigen::VectorXd aggregate(const Eigen::MatrixXd& features, AggregateKind kind) {
  if (features.rows() == 0) fail(Errc::kEmptyInput, "cannot aggregate zero feature rows");
  switch (kind) {
    case AggregateKind::kMax:
      return features.colwise().maxCoeff().transpose();
    case AggregateKind::kSum:
      return features.colwise().sum().transpose();
    case AggregateKind::kMean:
      break;
  }
  return features.colwise().mean().transpose();
}

ResidualRegressor::ResidualRegressor(PoseEncoding encoding, Eigen::MatrixXd weight, Eigen::VectorXd bias)
    : encoding_(encoding), weight_(std::move(weight)), bias_(std::move(bias)) {
  const Eigen::Index out = pose_size(encoding_) + kShapeCount;
  if (weight_.rows() != out || bias_.size() != out) {
    fail(Errc::kInvalidArgument, "regressor output must have " + std::to_string(out) + " rows");
  }
  if (!weight_.allFinite() || !bias_.allFinite()) fail(Errc::kInvalidArgument, "regressor is not finite");
}

ResidualRegressor ResidualRegressor::zero(PoseEncoding encoding, int input_dim) {
  const int out = pose_size(encoding) + kShapeCount;
  return ResidualRegressor(encoding, Eigen::MatrixXd::Zero(out, input_dim), Eigen::VectorXd::Zero(out));
}

Residual ResidualRegressor::predict(const Eigen::VectorXd& features) const {
  if (features.size() != weight_.cols()) {
    fail(Errc::kInvalidArgument, "regressor expects " + std::to_string(weight_.cols()) + " features, got " +
                                     std::to_string(features.size()));
  }
  const Eigen::VectorXd y = weight_ * features + bias_;
  const int p = pose_size(encoding_);
  return Residual{PoseParams(encoding_, y.head(p)), y.tail<kShapeCount>()};
}

RefineState apply_residual(const RefineState& state, const PoseParams& pose_delta, const ShapeVector& shape_delta) {
  if (pose_delta.encoding() != state.pose.encoding()) {
    fail(Errc::kInvalidArgument, "pose residual encoding differs from the state's");
  }
  RefineState out = state;
  out.pose = PoseParams(state.pose.encoding(), state.pose.values() + pose_delta.values());
  out.shape.beta = state.shape.beta + shape_delta;
  return out;
}

RefineState refine_step(const RefineState& state, const HandModelAssets& assets, const FeaturePyramid& pyramid,
                        const ResidualRegressor& regressor, AggregateKind kind) {
  const HandMesh mesh = forward_kinematics(assets, state.pose, state.shape).mesh;
  const Eigen::VectorXd features = aggregate(sample_vertex_features(mesh, state.camera, pyramid), kind);
  const Residual r = regressor.predict(features);
  return apply_residual(state, r.pose_delta, r.shape_delta);
}

SectionedFile feature_map_to_sectioned(const FeatureMap& map) {
  map.validate();
  SectionedFile file("featuremap");
  Eigen::MatrixXd meta(1, 4);
  meta << map.height, map.width, map.channels, map.stride;
  file.add("META", meta);
  file.add("DATA", map.values);
  return file;
}

FeatureMap feature_map_from_sectioned(const SectionedFile& file) {
  const auto& meta = file.get("META", 1, 4);
  const auto as_int = [&](Eigen::Index k) {
    const double v = meta(0, k);
    if (v != std::floor(v) || v < 1.0 || v > kMaxMapCells) fail(Errc::kParse, "feature map META holds a bad size");
    return static_cast<int>(v);
  };
  FeatureMap map{as_int(0), as_int(1), as_int(2), meta(0, 3), {}};
  if (static_cast<long long>(map.height) * map.width > kMaxMapCells) fail(Errc::kParse, "feature map too large");
  map.values = file.get("DATA", static_cast<Eigen::Index>(map.height) * map.width, map.channels);
  try {
    map.validate();
  } catch (const Error& e) {
    fail(Errc::kParse, e.what());
  }
  return map;
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  return feature_map_from_sectioned(read_sectioned(path, "featuremap"));
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
  write_sectioned(feature_map_to_sectioned(map), path);
}

SectionedFile regressor_to_sectioned(const ResidualRegressor& regressor) {
  SectionedFile file("regressor");
  file.add("WEIGHT", regressor.weight());
  file.add("BIAS", regressor.bias());
  return file;
}

ResidualRegressor regressor_from_sectioned(const SectionedFile& file) {
  const auto& weight = file.get("WEIGHT");
  const auto& bias = file.get("BIAS", weight.rows(), 1);
  PoseEncoding encoding = PoseEncoding::kAxisAngle;
  if (weight.rows() == pose_size(PoseEncoding::kRot6d) + kShapeCount) {
    encoding = PoseEncoding::kRot6d;
  } else if (weight.rows() != pose_size(PoseEncoding::kAxisAngle) + kShapeCount) {
    fail(Errc::kParse, "regressor WEIGHT has " + std::to_string(weight.rows()) + " rows, expected 58 or 106");
  }
  try {
    return ResidualRegressor(encoding, weight, bias.col(0));
  } catch (const Error& e) {
    fail(Errc::kParse, e.what());
  }
}

ResidualRegressor load_regressor(const std::filesystem::path& path) {
  return regressor_from_sectioned(read_sectioned(path, "regressor"));
}

void save_regressor(const ResidualRegressor& regressor, const std::filesystem::path& path) {
  write_sectioned(regressor_to_sectioned(regressor), path);
}

}  // namespace handkit
