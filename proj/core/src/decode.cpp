#include <algorithm>
#include <string>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"

namespace handkit {

Vec2 GridPrediction::cell_center(int cell) const {
  const int i = cell / grid_w;
  const int j = cell % grid_w;
  return Vec2((j + 0.5) * stride, (i + 0.5) * stride);
}

DflDistribution GridPrediction::distribution(int cell) const {
  DflDistribution d;
  const int width = bins + 1;
  for (int s = 0; s < 4; ++s) d.sides[static_cast<std::size_t>(s)] = dfl.row(cell).segment(s * width, width).transpose();
  return d;
}

void GridPrediction::validate() const {
  if (grid_h <= 0 || grid_w <= 0) fail(Errc::kInvalidArgument, "grid dimensions must be positive");
  if (!(stride > 0.0)) fail(Errc::kInvalidArgument, "grid stride must be positive");
  if (bins < 1) fail(Errc::kInvalidArgument, "grid needs at least one DFL bin");
  if (scores.rows() != cells() || scores.cols() != 2) {
    fail(Errc::kInvalidArgument, "grid scores must be " + std::to_string(cells()) + " x 2");
  }
  if (dfl.rows() != cells() || dfl.cols() != 4 * (bins + 1)) {
    fail(Errc::kInvalidArgument, "grid DFL probabilities must be " + std::to_string(cells()) + " x " +
                                     std::to_string(4 * (bins + 1)));
  }
  if (keypoints && (keypoints->rows() != cells() || keypoints->cols() != 2 * kKeypointCount)) {
    fail(Errc::kInvalidArgument, "grid keypoint offsets must be " + std::to_string(cells()) + " x 42");
  }
}

BBox decode_box(const DflDistribution& dist, const Vec2& center, double stride) {
  return BBox{center.x() - stride * dfl_expectation(dist.sides[0]), center.y() - stride * dfl_expectation(dist.sides[1]),
              center.x() + stride * dfl_expectation(dist.sides[2]), center.y() + stride * dfl_expectation(dist.sides[3])};
}

std::vector<Detection> decode_grid(const GridPrediction& pred, double score_thresh) {
  pred.validate();
  std::vector<Detection> out;
  for (int c = 0; c < pred.cells(); ++c) {
    const double left = pred.scores(c, 0);
    const double right = pred.scores(c, 1);
    const double best = std::max(left, right);
    if (best < score_thresh) continue;

    const Vec2 center = pred.cell_center(c);
    Detection d;
    d.box = decode_box(pred.distribution(c), center, pred.stride);
    d.score = best;
    d.side = right > left ? Side::kRight : Side::kLeft;
    if (pred.keypoints) {
      Points2 kp(kKeypointCount, 2);
      for (int k = 0; k < kKeypointCount; ++k) {
        kp(k, 0) = center.x() + pred.stride * (*pred.keypoints)(c, 2 * k);
        kp(k, 1) = center.y() + pred.stride * (*pred.keypoints)(c, 2 * k + 1);
      }
      d.keypoints = std::move(kp);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
  const auto source = [](const Detection& d) { return d.source_id.value_or(-1); };
  std::sort(dets.begin(), dets.end(), [&](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (source(a) != source(b)) return source(a) < source(b);
    if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
    if (a.box.y1 != b.box.y1) return a.box.y1 < b.box.y1;
    if (a.box.x2 != b.box.x2) return a.box.x2 < b.box.x2;
    if (a.box.y2 != b.box.y2) return a.box.y2 < b.box.y2;
    return a.side < b.side;
  });
  std::vector<Detection> kept;
  for (auto& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.side == d.side && iou(k.box, d.box) >= iou_thresh;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

}  // namespace handkit
