#pragma once

// Evaluation protocols. Point sets are in meters; errors are reported in
// millimeters unless a function says otherwise.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handkit/detection.hpp"
#include "handkit/hand_model.hpp"

namespace handkit {

/// Mean Euclidean distance between corresponding rows, millimeters.
[[nodiscard]] double mpjpe(const Points3& pred, const Points3& gt);

/// `pred` mapped through the similarity that best aligns it to `gt`.
[[nodiscard]] Points3 procrustes_align(const Points3& pred, const Points3& gt);

/// Similarity-aligned mean per-point error, millimeters. Propagates
/// Errc::kDegenerateConfiguration from the alignment.
[[nodiscard]] double pa_mpjpe(const Points3& pred, const Points3& gt);
[[nodiscard]] double pa_mpvpe(const HandMesh& pred, const HandMesh& gt);

/// Harmonic mean of precision and recall of nearest-neighbor matches within
/// tau_mm (inclusive). With `align`, pred is Procrustes-aligned first.
/// Throws Errc::kEmptyInput.
[[nodiscard]] double f_score(const Points3& pred, const Points3& gt, double tau_mm, bool align = false);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

/// Fraction of errors <= t at `steps` equally spaced thresholds in
/// [t_min, t_max].
[[nodiscard]] std::vector<CurvePoint> pck_curve(const std::vector<double>& errors_mm, double t_min,
                                                double t_max, int steps);
/// Mean of the PCK curve. Throws Errc::kEmptyInput or Errc::kInvalidArgument.
[[nodiscard]] double auc(const std::vector<double>& errors_mm, double t_min, double t_max, int steps);

struct GroundTruthBox {
  BBox box;
  Side side = Side::kRight;
};

/// Per-image lists; dets[i] and gts[i] describe the same image.
using ImageDetections = std::vector<std::vector<Detection>>;
using ImageGroundTruth = std::vector<std::vector<GroundTruthBox>>;

/// (recall, precision) after each detection in descending score order.
[[nodiscard]] std::vector<CurvePoint> precision_recall_curve(const ImageDetections& dets,
                                                             const ImageGroundTruth& gts, double iou_thresh);

/// Detections in descending score order claim the unmatched ground truth of
/// the same image and side with the highest IoU, if that IoU reaches the
/// threshold. AP integrates the precision envelope over recall. Throws
/// Errc::kUndefinedMetric when there is no ground truth at all and
/// Errc::kInvalidArgument when the image counts differ.
[[nodiscard]] double average_precision(const ImageDetections& dets, const ImageGroundTruth& gts,
                                       double iou_thresh = 0.5);

/// IoU thresholds 0.50, 0.55, ..., 0.95.
[[nodiscard]] std::vector<double> map_thresholds();
[[nodiscard]] double mean_ap(const ImageDetections& dets, const ImageGroundTruth& gts);

struct PoseFrame {
  Keypoints3 joints = Keypoints3::Zero();
  std::optional<Points3> vertices;
};

struct PoseSequence {
  std::vector<PoseFrame> frames;
  double frame_rate = 30.0;  // Hz

  /// Non-empty, positive frame rate, vertices on all frames or none with one
  /// count. Throws Errc::kInvalidArgument.
  void validate() const;
  [[nodiscard]] bool has_vertices() const { return !frames.empty() && frames.front().vertices.has_value(); }
};

/// Mean per-frame vertex / joint displacement between consecutive frames,
/// millimeters per frame. Throw Errc::kInsufficientFrames below 2 frames.
[[nodiscard]] double mpfve(const PoseSequence& seq);
[[nodiscard]] double mpfje(const PoseSequence& seq);

/// Mean joint jerk norm from the stencil (p[t+3] - 3p[t+2] + 3p[t+1] - p[t])
/// scaled by frame_rate^3, in input length units per s^3 (m/s^3 for meters).
/// Throws Errc::kInsufficientFrames below 4 frames.
[[nodiscard]] double jitter(const PoseSequence& seq);

/// Mean norm of the difference between predicted and true per-frame wrist
/// displacements, millimeters. Throws Errc::kInvalidArgument on length
/// mismatch and Errc::kInsufficientFrames below 2 frames.
[[nodiscard]] double rte(const PoseSequence& pred, const PoseSequence& gt);

struct ReportEntry {
  std::string id;
  double value = 0.0;
  std::string unit;
};

/// Ordered metric lines `id value unit`.
class EvalReport {
 public:
  /// Throws Errc::kInvalidArgument for a duplicate id or a non-finite value.
  void add(std::string id, double value, std::string unit);
  [[nodiscard]] const std::vector<ReportEntry>& entries() const noexcept { return entries_; }
  /// Throws Errc::kInvalidArgument for an unknown id.
  [[nodiscard]] double value(std::string_view id) const;
  [[nodiscard]] std::string to_text() const;

 private:
  std::vector<ReportEntry> entries_;
};

}  // namespace handkit
