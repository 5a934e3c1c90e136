#pragma once

// Record-oriented file formats used by the command-line tools. Every file
// starts with `HANDKIT <format> v1`; blank lines and lines starting with '#'
// are ignored by the line-based readers.
//
// landmarks:   IMAGE <id>, optional INTRINSICS fx fy cx cy, then 21 lines u v vis
// detections:  optional IMAGE <id> <width> <height> lines, then one detection per
//              line: <image> <source|-> <left|right> <score> x1 y1 x2 y2 [42 keypoint values]
// grid:        sectioned; LEVEL_<k>_META (H W stride bins), LEVEL_<k>_SCORES,
//              LEVEL_<k>_DFL, optional LEVEL_<k>_KPTS for k = 0, 1, ...
// sequence:    sectioned; META (frame_rate joints vertices), JOINTS (T x 63),
//              VERTICES (T x 3V) when vertices > 0
// poses:       sectioned; <id>.joints (21 x 3) and optional <id>.vertices (V x 3)
// corpus:      sectioned; MESHES (M x 3V), rows flattened x0 y0 z0 x1 ...
// params:      sectioned; POSE_AA (16 x 3) or POSE_6D (16 x 6), SHAPE (1 x 10),
//              CAMERA_WEAK (s tx ty) or CAMERA_PERSPECTIVE (fx fy cx cy tx ty tz)
// features:    sectioned; FEATURE (1 x D)

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handkit/detection.hpp"
#include "handkit/fitting.hpp"
#include "handkit/metrics.hpp"
#include "handkit/refine_sampler.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit {

struct LandmarkRecord {
  std::string image_id;
  Landmarks2D landmarks;
};

[[nodiscard]] std::vector<LandmarkRecord> parse_landmarks(std::string_view text);
[[nodiscard]] std::string format_landmarks(const std::vector<LandmarkRecord>& records);

struct ImageInfo {
  std::string id;
  double width = 0.0;
  double height = 0.0;
  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct DetectionRecord {
  std::string image_id;
  Detection detection;
};

struct DetectionSet {
  std::vector<ImageInfo> images;
  std::vector<DetectionRecord> records;

  /// Image ids in first-appearance order over headers then records.
  [[nodiscard]] std::vector<std::string> image_ids() const;
};

/// Throws Errc::kParse with the line number; a repeated IMAGE id with
/// different dimensions is a parse error. Blank input is an empty set.
[[nodiscard]] DetectionSet parse_detections(std::string_view text);
[[nodiscard]] std::string format_detections(const DetectionSet& set);

[[nodiscard]] SectionedFile grids_to_sectioned(const std::vector<GridPrediction>& levels);
[[nodiscard]] std::vector<GridPrediction> grids_from_sectioned(const SectionedFile& file);

[[nodiscard]] SectionedFile sequence_to_sectioned(const PoseSequence& seq);
[[nodiscard]] PoseSequence sequence_from_sectioned(const SectionedFile& file);

struct NamedPose {
  std::string id;
  Keypoints3 joints = Keypoints3::Zero();
  std::optional<Points3> vertices;
};

[[nodiscard]] SectionedFile poses_to_sectioned(const std::vector<NamedPose>& poses);
[[nodiscard]] std::vector<NamedPose> poses_from_sectioned(const SectionedFile& file);

[[nodiscard]] SectionedFile corpus_to_sectioned(const Eigen::MatrixXd& meshes);
[[nodiscard]] Eigen::MatrixXd corpus_from_sectioned(const SectionedFile& file);

struct HandParams {
  PoseParams pose = PoseParams::identity();
  ShapeParams shape;
  FitCamera camera = WeakPerspectiveCamera{};
};

[[nodiscard]] SectionedFile params_to_sectioned(const HandParams& params);
[[nodiscard]] HandParams params_from_sectioned(const SectionedFile& file);

[[nodiscard]] SectionedFile features_to_sectioned(const Eigen::VectorXd& feature);
[[nodiscard]] Eigen::VectorXd features_from_sectioned(const SectionedFile& file);

/// `iteration,objective` lines after the header, one per optimizer iteration
/// starting at 1; the initial objective is not part of the trace.
[[nodiscard]] std::string format_trace(const FitResult& result);
/// Header line `HANDKIT report v1` followed by the report lines.
[[nodiscard]] std::string format_report(const EvalReport& report);

}  // namespace handkit
