#include "handkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "handkit/camera.hpp"
#include "handkit/error.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit {
namespace {

constexpr double kMillimeters = 1000.0;

void check_pair(const Points3& pred, const Points3& gt) {
  if (pred.rows() != gt.rows()) {
    fail(Errc::kInvalidArgument, "point counts differ: " + std::to_string(pred.rows()) + " vs " +
                                     std::to_string(gt.rows()));
  }
  if (pred.rows() == 0) fail(Errc::kEmptyInput, "no points to compare");
}

/// Fraction of rows of `from` whose nearest row of `to` lies within tau (m).
double covered_fraction(const Points3& from, const Points3& to, double tau) {
  int hits = 0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    const double nearest = (to.rowwise() - from.row(i)).rowwise().squaredNorm().minCoeff();
    if (std::sqrt(nearest) <= tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from.rows());
}

struct Ranked {
  double score;
  std::size_t image;
  std::size_t index;
};

}  // namespace

double mpjpe(const Points3& pred, const Points3& gt) {
  check_pair(pred, gt);
  return (pred - gt).rowwise().norm().mean() * kMillimeters;
}

Points3 procrustes_align(const Points3& pred, const Points3& gt) {
  check_pair(pred, gt);
  return kabsch_similarity(pred, gt).apply(pred);
}

double pa_mpjpe(const Points3& pred, const Points3& gt) { return mpjpe(procrustes_align(pred, gt), gt); }

double pa_mpvpe(const HandMesh& pred, const HandMesh& gt) { return pa_mpjpe(pred.vertices, gt.vertices); }

double f_score(const Points3& pred, const Points3& gt, double tau_mm, bool align) {
  if (pred.rows() == 0 || gt.rows() == 0) fail(Errc::kEmptyInput, "F-score needs non-empty point sets");
  if (!(tau_mm >= 0.0)) fail(Errc::kInvalidArgument, "F-score threshold must be non-negative");
  const Points3 p = align ? procrustes_align(pred, gt) : pred;
  const double tau = tau_mm / kMillimeters;
  const double precision = covered_fraction(p, gt, tau);
  const double recall = covered_fraction(gt, p, tau);
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::vector<CurvePoint> pck_curve(const std::vector<double>& errors_mm, double t_min, double t_max, int steps) {
  if (errors_mm.empty()) fail(Errc::kEmptyInput, "no errors to accumulate");
  if (!(t_min >= 0.0) || !(t_max > t_min) || steps < 2) {
    fail(Errc::kInvalidArgument, "PCK needs 0 <= t_min < t_max and at least 2 steps");
  }
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double t = t_min + (t_max - t_min) * k / (steps - 1);
    const auto hits = std::count_if(errors_mm.begin(), errors_mm.end(), [&](double e) { return e <= t; });
    curve.push_back({t, static_cast<double>(hits) / static_cast<double>(errors_mm.size())});
  }
  return curve;
}

double auc(const std::vector<double>& errors_mm, double t_min, double t_max, int steps) {
  const auto curve = pck_curve(errors_mm, t_min, t_max, steps);
  double sum = 0.0;
  for (const auto& p : curve) sum += p.y;
  return sum / static_cast<double>(curve.size());
}

std::vector<CurvePoint> precision_recall_curve(const ImageDetections& dets, const ImageGroundTruth& gts,
                                               double iou_thresh) {
  if (dets.size() != gts.size()) {
    fail(Errc::kInvalidArgument, "detections cover " + std::to_string(dets.size()) + " images, ground truth " +
                                     std::to_string(gts.size()));
  }
  std::size_t total_gt = 0;
  for (const auto& g : gts) total_gt += g.size();
  if (total_gt == 0) fail(Errc::kUndefinedMetric, "average precision is undefined without ground truth");

  std::vector<Ranked> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t k = 0; k < dets[i].size(); ++k) order.push_back({dets[i][k].score, i, k});
  }
  std::stable_sort(order.begin(), order.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> matched(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) matched[i].assign(gts[i].size(), false);

  std::vector<CurvePoint> curve;
  curve.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Detection& d = dets[order[r].image][order[r].index];
    const auto& candidates = gts[order[r].image];
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (matched[order[r].image][k] || candidates[k].side != d.side) continue;
      const double o = iou(d.box, candidates[k].box);
      if (o > best) {
        best = o;
        best_k = k;
      }
    }
    if (best >= 0.0 && best >= iou_thresh) {
      matched[order[r].image][best_k] = true;
      ++tp;
    }
    curve.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                     static_cast<double>(tp) / static_cast<double>(r + 1)});
  }
  return curve;
}

double average_precision(const ImageDetections& dets, const ImageGroundTruth& gts, double iou_thresh) {
  const auto curve = precision_recall_curve(dets, gts, iou_thresh);
  std::vector<double> envelope(curve.size() + 1, 0.0);
  for (std::size_t r = curve.size(); r-- > 0;) envelope[r] = std::max(envelope[r + 1], curve[r].y);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t r = 0; r < curve.size(); ++r) {
    if (curve[r].x <= prev_recall) continue;
    ap += (curve[r].x - prev_recall) * envelope[r];
    prev_recall = curve[r].x;
  }
  return ap;
}

std::vector<double> map_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

double mean_ap(const ImageDetections& dets, const ImageGroundTruth& gts) {
  const auto thresholds = map_thresholds();
  double sum = 0.0;
  for (double t : thresholds) sum += average_precision(dets, gts, t);
  return sum / static_cast<double>(thresholds.size());
}

void EvalReport::add(std::string id, double value, std::string unit) {
  if (!std::isfinite(value)) fail(Errc::kInvalidArgument, "metric " + id + " is not finite");
  if (std::any_of(entries_.begin(), entries_.end(), [&](const ReportEntry& e) { return e.id == id; })) {
    fail(Errc::kInvalidArgument, "duplicate metric " + id);
  }
  entries_.push_back({std::move(id), value, std::move(unit)});
}

double EvalReport::value(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.value;
  }
  fail(Errc::kInvalidArgument, "unknown metric " + std::string(id));
}

std::string EvalReport::to_text() const {
  std::string out;
  for (const auto& e : entries_) out += e.id + " " + format_number(e.value) + " " + e.unit + "\n";
  return out;
}

}  // namespace handkit
