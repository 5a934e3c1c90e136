#include <algorithm>
#include <cmath>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"

namespace handkit {
namespace {

struct Pooled {
  const Detection* det;
  int source;
};

struct Cluster {
  std::vector<Pooled> members;
};

}  // namespace

BBox fuse_boxes(const std::vector<WeightedBox>& members) {
  if (members.empty()) fail(Errc::kEmptyInput, "box fusion needs at least one member");
  double mass = 0.0;
  BBox acc{};
  for (const auto& m : members) {
    m.box.validate();
    if (!(m.confidence >= 0.0) || !std::isfinite(m.confidence)) {
      fail(Errc::kInvalidArgument, "fusion confidence must be finite and non-negative");
    }
    mass += m.confidence;
    acc.x1 += m.confidence * m.box.x1;
    acc.y1 += m.confidence * m.box.y1;
    acc.x2 += m.confidence * m.box.x2;
    acc.y2 += m.confidence * m.box.y2;
  }
  if (!(mass > 0.0)) fail(Errc::kZeroMass, "fusion confidences sum to zero");
  return BBox{acc.x1 / mass, acc.y1 / mass, acc.x2 / mass, acc.y2 / mass};
}

std::vector<Detection> associate_and_fuse(const std::vector<std::vector<Detection>>& per_detector,
                                          double iou_thresh) {
  std::vector<Pooled> pool;
  for (std::size_t s = 0; s < per_detector.size(); ++s) {
    for (const auto& d : per_detector[s]) {
      d.validate();
      pool.push_back({&d, static_cast<int>(s)});
    }
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Pooled& a, const Pooled& b) {
    if (a.det->score != b.det->score) return a.det->score > b.det->score;
    return a.source < b.source;
  });

  std::vector<Cluster> clusters;
  for (const auto& p : pool) {
    Cluster* target = nullptr;
    for (auto& c : clusters) {
      const Detection& seed = *c.members.front().det;
      if (seed.side != p.det->side || iou(seed.box, p.det->box) < iou_thresh) continue;
      const bool taken = std::any_of(c.members.begin(), c.members.end(),
                                     [&](const Pooled& m) { return m.source == p.source; });
      if (taken) continue;
      target = &c;
      break;
    }
    if (target != nullptr) {
      target->members.push_back(p);
    } else {
      clusters.push_back(Cluster{{p}});
    }
  }

  std::vector<Detection> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    if (c.members.size() == 1) {
      Detection single = *c.members.front().det;
      single.source_id.reset();
      out.push_back(std::move(single));
      continue;
    }
    double mass = 0.0;
    for (const auto& m : c.members) mass += m.det->score;
    // All-zero scores carry no preference, so members count equally.
    const auto weight = [&](const Pooled& m) { return mass > 0.0 ? m.det->score : 1.0; };

    std::vector<WeightedBox> boxes;
    double wsum = 0.0;
    double score = 0.0;
    for (const auto& m : c.members) {
      boxes.push_back({m.det->box, weight(m)});
      wsum += weight(m);
      score += weight(m) * m.det->score;
    }
    Detection fused;
    fused.box = fuse_boxes(boxes);
    fused.score = score / wsum;
    fused.side = c.members.front().det->side;

    const bool all_kp = std::all_of(c.members.begin(), c.members.end(),
                                     [](const Pooled& m) { return m.det->keypoints.has_value(); });
    if (all_kp) {
      Points2 kp = Points2::Zero(kKeypointCount, 2);
      for (const auto& m : c.members) kp += weight(m) * *m.det->keypoints;
      fused.keypoints = kp / wsum;
    }
    out.push_back(std::move(fused));
  }
  return out;
}

}  // namespace handkit
