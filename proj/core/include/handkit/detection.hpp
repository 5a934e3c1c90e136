#pragma once

// Hand detection post-processing: box algebra, the multi-task detection loss,
// anchor-free grid decoding, per-side NMS and multi-detector box fusion.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "handkit/hand_model.hpp"
#include "handkit/losses.hpp"

namespace handkit {

/// Axis-aligned box in corner form, pixels.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  [[nodiscard]] static BBox from_center(double cx, double cy, double w, double h);

  [[nodiscard]] double width() const { return x2 - x1; }
  [[nodiscard]] double height() const { return y2 - y1; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] double cx() const { return 0.5 * (x1 + x2); }
  [[nodiscard]] double cy() const { return 0.5 * (y1 + y2); }

  /// Finite with x1 <= x2 and y1 <= y2.
  [[nodiscard]] bool valid() const;
  /// Throws Errc::kInvalidBox when not valid().
  void validate() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class Side { kLeft = 0, kRight = 1 };

[[nodiscard]] const char* side_name(Side side);
/// Accepts "left"/"right"; throws Errc::kParse otherwise.
[[nodiscard]] Side parse_side(std::string_view text);

struct Detection {
  BBox box;
  double score = 0.0;
  Side side = Side::kRight;
  std::optional<Points2> keypoints;  // 21 x 2 pixels
  std::optional<int> source_id;

  /// Throws Errc::kInvalidBox or Errc::kInvalidArgument.
  void validate() const;
};

inline constexpr int kDefaultDflBins = 16;

/// Discrete distance distributions for the left, top, right and bottom box
/// sides, each over bins 0..n.
struct DflDistribution {
  std::array<Eigen::VectorXd, 4> sides;

  [[nodiscard]] int bins() const { return static_cast<int>(sides[0].size()) - 1; }
  /// Each side non-negative and summing to 1 within 1e-6, equal lengths >= 2.
  void validate() const;
};

/// Dense predictions for one pyramid level. Row c = i * grid_w + j.
struct GridPrediction {
  int grid_h = 0;
  int grid_w = 0;
  double stride = 1.0;
  int bins = kDefaultDflBins;
  Eigen::MatrixXd scores;                   // cells x 2 (left, right), in [0, 1]
  Eigen::MatrixXd dfl;                      // cells x 4 (bins + 1), side-major l t r b
  std::optional<Eigen::MatrixXd> keypoints;  // cells x 42 offsets in cells from the center

  [[nodiscard]] int cells() const { return grid_h * grid_w; }
  [[nodiscard]] Vec2 cell_center(int cell) const;
  [[nodiscard]] DflDistribution distribution(int cell) const;
  /// Throws Errc::kInvalidArgument on inconsistent dimensions or stride <= 0.
  void validate() const;
};

[[nodiscard]] double iou(const BBox& a, const BBox& b);

/// 1 - IoU + rho^2 / c^2 + alpha * v. Throws Errc::kInvalidBox for zero area.
[[nodiscard]] double ciou_loss(const BBox& pred, const BBox& gt);

/// Distribution focal loss for a real target in [0, n]. Throws
/// Errc::kInvalidTarget when the target is out of range.
[[nodiscard]] double dfl_loss(const Eigen::VectorXd& dist, double target);
[[nodiscard]] double dfl_expectation(const Eigen::VectorXd& dist);

/// Box decoded from side distances (cells) around a center (pixels).
[[nodiscard]] BBox decode_box(const DflDistribution& dist, const Vec2& center, double stride);

struct AnchorPrediction {
  Vec2 center = Vec2::Zero();  // pixels
  double stride = 1.0;
  Eigen::Vector2d scores = Eigen::Vector2d::Zero();  // left, right
  DflDistribution dfl;
  std::optional<Points2> keypoints;  // 21 x 2 pixels
};

struct GroundTruthHand {
  BBox box;
  Side side = Side::kRight;
  std::optional<Points2> keypoints;             // 21 x 2 pixels
  std::optional<Eigen::VectorXi> visibility;    // 21 entries, all visible if absent
};

/// Anchor-to-object assignment: assignment[a] is an index into objects or -1
/// for a negative anchor.
struct DetectionTargets {
  std::vector<GroundTruthHand> objects;
  std::vector<int> assignment;
};

struct DetectionLossWeights {
  double cls = 0.5;
  double dfl = 1.5;
  double box = 15.0;
  double keypoints = 10.0;
};

/// Terms "cls" (BCE summed over both classes, mean over anchors), "dfl"
/// (mean over positive sides), "box" (CIoU, mean over positives) and
/// "keypoints" (squared pixel error, mean over visible keypoints). Side
/// distance targets are clamped to [0, n]. Throws Errc::kInvalidArgument when
/// the assignment does not cover every anchor or names a missing object.
[[nodiscard]] LossBreakdown detection_loss(const std::vector<AnchorPrediction>& preds,
                                           const DetectionTargets& targets,
                                           const DetectionLossWeights& weights = {});

/// Cells whose best class score reaches `score_thresh`, in cell order.
[[nodiscard]] std::vector<Detection> decode_grid(const GridPrediction& pred, double score_thresh);

/// Greedy per-side suppression. Ties in score are broken by source id, then
/// box coordinates, so the result does not depend on input order.
[[nodiscard]] std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

struct WeightedBox {
  BBox box;
  double confidence = 0.0;
};

/// Confidence-weighted average per corner coordinate. Throws
/// Errc::kEmptyInput for no members and Errc::kZeroMass when the confidences
/// sum to zero.
[[nodiscard]] BBox fuse_boxes(const std::vector<WeightedBox>& members);

/// Pools every detector's detections, clusters them greedily by IoU within a
/// side label (at most one member per detector and cluster) and fuses each
/// cluster. The fused score is the score-weighted mean score (uniform weights
/// if every score is 0) and keypoints are fused with the same weights when
/// every member has them. Single-member clusters keep box, score and
/// keypoints bit for bit. Outputs carry no source id and follow descending
/// seed score.
[[nodiscard]] std::vector<Detection> associate_and_fuse(
    const std::vector<std::vector<Detection>>& per_detector, double iou_thresh = 0.5);

}  // namespace handkit
