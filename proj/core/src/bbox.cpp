#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"

namespace handkit {

BBox BBox::from_center(double cx, double cy, double w, double h) {
  return BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 <= x2 &&
         y1 <= y2;
}

void BBox::validate() const {
  if (!valid()) {
    fail(Errc::kInvalidBox, "box (" + std::to_string(x1) + ", " + std::to_string(y1) + ", " +
                                std::to_string(x2) + ", " + std::to_string(y2) + ") is not a valid corner box");
  }
}

const char* side_name(Side side) { return side == Side::kLeft ? "left" : "right"; }

Side parse_side(std::string_view text) {
  if (text == "left") return Side::kLeft;
  if (text == "right") return Side::kRight;
  fail(Errc::kParse, "unknown hand side '" + std::string(text) + "'");
}

void Detection::validate() const {
  box.validate();
  if (!(score >= 0.0 && score <= 1.0)) fail(Errc::kInvalidArgument, "detection score outside [0, 1]");
  if (keypoints && (keypoints->rows() != kKeypointCount || keypoints->cols() != 2)) {
    fail(Errc::kInvalidArgument, "detection keypoints must be 21 x 2");
  }
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double ciou_loss(const BBox& pred, const BBox& gt) {
  pred.validate();
  gt.validate();
  if (!(pred.area() > 0.0) || !(gt.area() > 0.0)) fail(Errc::kInvalidBox, "CIoU needs boxes with positive area");

  const double overlap = iou(pred, gt);
  const double dx = pred.cx() - gt.cx();
  const double dy = pred.cy() - gt.cy();
  const double ew = std::max(pred.x2, gt.x2) - std::min(pred.x1, gt.x1);
  const double eh = std::max(pred.y2, gt.y2) - std::min(pred.y1, gt.y1);
  const double c2 = ew * ew + eh * eh;
  const double da = std::atan(gt.width() / gt.height()) - std::atan(pred.width() / pred.height());
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * da * da;
  const double alpha = v > 0.0 ? v / ((1.0 - overlap) + v) : 0.0;
  return 1.0 - overlap + (dx * dx + dy * dy) / c2 + alpha * v;
}

}  // namespace handkit
