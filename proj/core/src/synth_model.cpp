#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "handkit/error.hpp"
#include "handkit/hand_model.hpp"
#include "random.hpp"

namespace handkit {
namespace {

struct Segment {
  int owner;  // joint whose transform carries this segment
  Vec3 a;
  Vec3 b;
};

double point_segment_distance(const Vec3& p, const Segment& s) {
  const Vec3 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (p - (s.a + t * d)).norm();
}

Vec3 random_perpendicular(detail::Rng& rng, const Vec3& axis) {
  const Vec3 n = axis.normalized();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vec3 u(rng.normal(), rng.normal(), rng.normal());
    u -= u.dot(n) * n;
    if (u.norm() > 1e-6) return u.normalized();
  }
  return n.unitOrthogonal();
}

}  // namespace

HandModelAssets synth_model(std::uint64_t seed, int vertex_count) {
  if (vertex_count < 30) {
    fail(Errc::kInvalidArgument,
         "synthetic model needs at least 30 vertices, got " + std::to_string(vertex_count));
  }
  detail::Rng rng(seed);
  const auto jitter = [&](double scale) { return 1.0 + scale * rng.uniform(-1.0, 1.0); };

  // Designed skeleton, meters. Palm in the x-y plane, fingers along +y.
  struct FingerSpec {
    Vec3 base;
    Vec3 direction;
    std::array<double, 4> lengths;  // three phalanges plus the tip extension
  };
  const std::array<FingerSpec, 5> fingers = {{
      {{0.022, 0.085, 0.0}, {0.10, 1.0, 0.0}, {0.040, 0.025, 0.020, 0.018}},   // index
      {{0.000, 0.090, 0.0}, {0.00, 1.0, 0.0}, {0.044, 0.028, 0.021, 0.018}},   // middle
      {{-0.035, 0.075, 0.0}, {-0.20, 1.0, 0.0}, {0.032, 0.020, 0.017, 0.015}}, // pinky
      {{-0.018, 0.085, 0.0}, {-0.10, 1.0, 0.0}, {0.041, 0.026, 0.020, 0.017}}, // ring
      {{0.025, 0.020, 0.005}, {0.70, 0.70, 0.10}, {0.035, 0.030, 0.025, 0.020}}, // thumb
  }};

  std::array<Vec3, kJointCount> joints;
  std::array<Vec3, kFingertipCount> tips;
  joints[0] = Vec3::Zero();
  for (int f = 0; f < 5; ++f) {
    const auto& spec = fingers[static_cast<std::size_t>(f)];
    const Vec3 base = spec.base + 0.003 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 dir = spec.direction.normalized();
    Vec3 p = base;
    joints[1 + 3 * f] = p;
    for (int k = 0; k < 2; ++k) {
      p += spec.lengths[static_cast<std::size_t>(k)] * jitter(0.1) * dir;
      joints[2 + 3 * f + k] = p;
    }
    tips[static_cast<std::size_t>(f)] = p + (spec.lengths[2] + spec.lengths[3]) * jitter(0.1) * dir;
  }

  const std::array<int, kFingertipCount> tip_ids = {1, 2, 3, 4, 5};
  KinematicTree tree = KinematicTree::mano_like(tip_ids);

  // Each joint carries the segments to its children; distal joints carry the
  // segment to the fingertip.
  std::vector<Segment> segments;
  for (int j = 1; j < kJointCount; ++j) {
    const int p = tree.parent[static_cast<std::size_t>(j)];
    segments.push_back({p, joints[p], joints[j]});
  }
  for (int f = 0; f < 5; ++f) {
    const int distal = 3 + 3 * f;
    segments.push_back({distal, joints[distal], tips[static_cast<std::size_t>(f)]});
  }

  const int v_count = vertex_count;
  Points3 vertices(v_count, 3);
  std::vector<std::vector<int>> per_segment(segments.size());
  vertices.row(0).setZero();  // wrist vertex, exactly at the origin
  for (int f = 0; f < 5; ++f) vertices.row(1 + f) = tips[static_cast<std::size_t>(f)].transpose();
  for (int i = 6; i < v_count; ++i) {
    const std::size_t s = static_cast<std::size_t>(i - 6) % segments.size();
    const auto& seg = segments[s];
    const double t = rng.uniform(0.05, 0.95);
    const double radius = rng.uniform(0.006, 0.009);
    const Vec3 axis = seg.b - seg.a;
    const Vec3 p = seg.a + t * axis + radius * random_perpendicular(rng, axis);
    vertices.row(i) = p.transpose();
    per_segment[s].push_back(i);
  }

  // Skin weights: Gaussian falloff with distance to each joint's segments.
  constexpr double kSigma = 0.01;
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(v_count, kJointCount);
  for (int i = 0; i < v_count; ++i) {
    const Vec3 p = vertices.row(i).transpose();
    std::array<double, kJointCount> nearest;
    nearest.fill(std::numeric_limits<double>::infinity());
    for (const auto& seg : segments) {
      nearest[seg.owner] = std::min(nearest[seg.owner], point_segment_distance(p, seg));
    }
    double total = 0.0;
    for (int j = 0; j < kJointCount; ++j) {
      const double d = nearest[j];
      const double w = std::isfinite(d) ? std::exp(-d * d / (2.0 * kSigma * kSigma)) : 0.0;
      weights(i, j) = w;
      total += w;
    }
    weights.row(i) /= total;
  }

  // Regressor: the root reads the wrist vertex alone; other joints blend their
  // four nearest vertices by inverse distance.
  Eigen::MatrixXd regressor = Eigen::MatrixXd::Zero(kJointCount, v_count);
  regressor(0, 0) = 1.0;
  for (int j = 1; j < kJointCount; ++j) {
    std::vector<int> order(static_cast<std::size_t>(v_count - 1));
    std::iota(order.begin(), order.end(), 1);
    const auto dist = [&](int i) { return (vertices.row(i).transpose() - joints[j]).norm(); };
    std::partial_sort(order.begin(), order.begin() + 4, order.end(), [&](int a, int b) {
      const double da = dist(a);
      const double db = dist(b);
      return da < db || (da == db && a < b);
    });
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      const int i = order[static_cast<std::size_t>(k)];
      regressor(j, i) = 1.0 / (dist(i) + 1e-3);
      total += regressor(j, i);
    }
    regressor.row(j) /= total;
  }

  // Shape fields: smooth per-joint displacements blended by the skin weights,
  // zero at the wrist vertex, then orthonormalized and scaled to a 2 mm RMS.
  std::vector<Eigen::VectorXd> flat;
  for (int k = 0; k < kShapeCount; ++k) {
    Eigen::Matrix<double, kJointCount, 3> g;
    for (int j = 0; j < kJointCount; ++j) {
      for (int c = 0; c < 3; ++c) g(j, c) = rng.normal();
    }
    Points3 field = weights * g;
    field.row(0).setZero();
    Eigen::VectorXd f(3 * v_count);
    for (int i = 0; i < v_count; ++i) f.segment<3>(3 * i) = field.row(i).transpose();
    for (const auto& prev : flat) f -= prev.dot(f) * prev;
    f.normalize();
    flat.push_back(f);
  }
  const double field_norm = 0.002 * std::sqrt(static_cast<double>(v_count));

  HandModelAssets assets;
  assets.template_vertices = vertices;
  assets.joint_regressor = regressor;
  assets.skin_weights = weights;
  for (const auto& f : flat) {
    Points3 field(v_count, 3);
    for (int i = 0; i < v_count; ++i) field.row(i) = field_norm * f.segment<3>(3 * i).transpose();
    assets.shape_basis.push_back(field);
  }

  std::vector<Eigen::RowVector3i> tris;
  for (const auto& ids : per_segment) {
    for (std::size_t k = 0; k + 2 < ids.size(); ++k) tris.emplace_back(ids[k], ids[k + 1], ids[k + 2]);
  }
  assets.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t k = 0; k < tris.size(); ++k) assets.faces.row(static_cast<Eigen::Index>(k)) = tris[k];
  assets.tree = tree;

  assets.validate();
  return assets;
}

}  // namespace handkit
