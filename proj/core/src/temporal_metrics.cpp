#include <cmath>
#include <string>

#include "handkit/error.hpp"
#include "handkit/metrics.hpp"

namespace handkit {
namespace {

constexpr double kMillimeters = 1000.0;

void require_frames(const PoseSequence& seq, std::size_t n, const char* metric) {
  seq.validate();
  if (seq.frames.size() < n) {
    fail(Errc::kInsufficientFrames, std::string(metric) + " needs at least " + std::to_string(n) + " frames, got " +
                                        std::to_string(seq.frames.size()));
  }
}

template <typename Get>
double mean_frame_displacement(const PoseSequence& seq, Get get) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    const auto& a = get(seq.frames[t - 1]);
    const auto& b = get(seq.frames[t]);
    sum += (b - a).rowwise().norm().sum();
    count += a.rows();
  }
  return count > 0 ? sum / static_cast<double>(count) * kMillimeters : 0.0;
}

}  // namespace

void PoseSequence::validate() const {
  if (frames.empty()) fail(Errc::kInvalidArgument, "pose sequence has no frames");
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) fail(Errc::kInvalidArgument, "frame rate must be positive");
  const bool with_vertices = frames.front().vertices.has_value();
  const Eigen::Index v = with_vertices ? frames.front().vertices->rows() : 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    if (f.vertices.has_value() != with_vertices || (with_vertices && f.vertices->rows() != v)) {
      fail(Errc::kInvalidArgument, "frame " + std::to_string(t) + " has an inconsistent vertex payload");
    }
  }
}

double mpfve(const PoseSequence& seq) {
  require_frames(seq, 2, "MPFVE");
  if (!seq.has_vertices()) fail(Errc::kInvalidArgument, "MPFVE needs per-frame vertices");
  return mean_frame_displacement(seq, [](const PoseFrame& f) -> const Points3& { return *f.vertices; });
}

double mpfje(const PoseSequence& seq) {
  require_frames(seq, 2, "MPFJE");
  return mean_frame_displacement(seq, [](const PoseFrame& f) -> const Keypoints3& { return f.joints; });
}

double jitter(const PoseSequence& seq) {
  require_frames(seq, 4, "jitter");
  const double scale = seq.frame_rate * seq.frame_rate * seq.frame_rate;
  double sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t t = 0; t + 3 < seq.frames.size(); ++t) {
    const Keypoints3 jerk = seq.frames[t + 3].joints - 3.0 * seq.frames[t + 2].joints +
                            3.0 * seq.frames[t + 1].joints - seq.frames[t].joints;
    sum += jerk.rowwise().norm().sum() * scale;
    count += jerk.rows();
  }
  return sum / static_cast<double>(count);
}

double rte(const PoseSequence& pred, const PoseSequence& gt) {
  if (pred.frames.size() != gt.frames.size()) {
    fail(Errc::kInvalidArgument, "sequence lengths differ: " + std::to_string(pred.frames.size()) + " vs " +
                                     std::to_string(gt.frames.size()));
  }
  require_frames(pred, 2, "RTE");
  require_frames(gt, 2, "RTE");
  double sum = 0.0;
  for (std::size_t t = 1; t < pred.frames.size(); ++t) {
    const Vec3 dp = (pred.frames[t].joints.row(0) - pred.frames[t - 1].joints.row(0)).transpose();
    const Vec3 dg = (gt.frames[t].joints.row(0) - gt.frames[t - 1].joints.row(0)).transpose();
    sum += (dp - dg).norm();
  }
  return sum / static_cast<double>(pred.frames.size() - 1) * kMillimeters;
}

}  // namespace handkit
