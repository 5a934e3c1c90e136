#include <algorithm>
#include <cmath>
#include <string>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"

namespace handkit {
namespace {

constexpr double kLogFloor = 1e-12;

double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

double bce(double p, double target) {
  return -(target * safe_log(p) + (1.0 - target) * safe_log(1.0 - p));
}

}  // namespace

void DflDistribution::validate() const {
  const auto n = sides[0].size();
  if (n < 2) fail(Errc::kInvalidArgument, "side distributions need at least two bins");
  for (const auto& p : sides) {
    if (p.size() != n) fail(Errc::kInvalidArgument, "side distributions differ in length");
    if (!p.allFinite() || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-6) {
      fail(Errc::kInvalidArgument, "side distribution is not a probability vector");
    }
  }
}

double dfl_loss(const Eigen::VectorXd& dist, double target) {
  const auto n = static_cast<int>(dist.size()) - 1;
  if (n < 1) fail(Errc::kInvalidArgument, "distribution needs at least two bins");
  if (!(target >= 0.0 && target <= n)) {
    fail(Errc::kInvalidTarget, "target " + std::to_string(target) + " outside [0, " + std::to_string(n) + "]");
  }
  const int i = std::min(static_cast<int>(std::floor(target)), n - 1);
  return -((i + 1 - target) * safe_log(dist[i]) + (target - i) * safe_log(dist[i + 1]));
}

double dfl_expectation(const Eigen::VectorXd& dist) {
  double e = 0.0;
  for (Eigen::Index k = 0; k < dist.size(); ++k) e += static_cast<double>(k) * dist[k];
  return e;
}

LossBreakdown detection_loss(const std::vector<AnchorPrediction>& preds, const DetectionTargets& targets,
                             const DetectionLossWeights& weights) {
  if (targets.assignment.size() != preds.size()) {
    fail(Errc::kInvalidArgument, "assignment covers " + std::to_string(targets.assignment.size()) +
                                     " anchors, predictions have " + std::to_string(preds.size()));
  }
  double cls_sum = 0.0;
  double dfl_sum = 0.0;
  double box_sum = 0.0;
  double kp_sum = 0.0;
  int positives = 0;
  int visible_kps = 0;

  for (std::size_t a = 0; a < preds.size(); ++a) {
    const auto& p = preds[a];
    const int k = targets.assignment[a];
    if (k < -1 || k >= static_cast<int>(targets.objects.size())) {
      fail(Errc::kInvalidArgument, "anchor " + std::to_string(a) + " is assigned to missing object " +
                                       std::to_string(k));
    }
    if (k < 0) {
      cls_sum += bce(p.scores[0], 0.0) + bce(p.scores[1], 0.0);
      continue;
    }
    const auto& gt = targets.objects[static_cast<std::size_t>(k)];
    const int cls = static_cast<int>(gt.side);
    cls_sum += bce(p.scores[0], cls == 0 ? 1.0 : 0.0) + bce(p.scores[1], cls == 1 ? 1.0 : 0.0);

    const int n = p.dfl.bins();
    const std::array<double, 4> dist{(p.center.x() - gt.box.x1) / p.stride, (p.center.y() - gt.box.y1) / p.stride,
                                     (gt.box.x2 - p.center.x()) / p.stride, (gt.box.y2 - p.center.y()) / p.stride};
    for (int s = 0; s < 4; ++s) {
      dfl_sum += dfl_loss(p.dfl.sides[static_cast<std::size_t>(s)], std::clamp(dist[static_cast<std::size_t>(s)], 0.0, double(n)));
    }
    box_sum += ciou_loss(decode_box(p.dfl, p.center, p.stride), gt.box);
    ++positives;

    if (gt.keypoints && p.keypoints) {
      for (int j = 0; j < kKeypointCount; ++j) {
        if (gt.visibility && (*gt.visibility)[j] == 0) continue;
        kp_sum += (p.keypoints->row(j) - gt.keypoints->row(j)).squaredNorm();
        ++visible_kps;
      }
    }
  }

  LossBreakdown out;
  out.add("cls", preds.empty() ? 0.0 : cls_sum / static_cast<double>(preds.size()), weights.cls, !preds.empty());
  out.add("dfl", positives > 0 ? dfl_sum / (4.0 * positives) : 0.0, weights.dfl, positives > 0);
  out.add("box", positives > 0 ? box_sum / positives : 0.0, weights.box, positives > 0);
  out.add("keypoints", visible_kps > 0 ? kp_sum / visible_kps : 0.0, weights.keypoints, visible_kps > 0);
  return out;
}

}  // namespace handkit
