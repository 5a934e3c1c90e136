#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace handkit::testing {

Vec3 TestRng::unit_vector() {
  while (true) {
    const Vec3 v(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 0.1 && n <= 1.0) return v / n;
  }
}

Eigen::MatrixXd TestRng::matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
  }
  return m;
}

Mat3 quaternion_rotation(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  const Vec3 axis = angle > 0.0 ? Vec3(axis_angle / angle) : Vec3::UnitX();
  const double w = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  const double x = s * axis.x();
  const double y = s * axis.y();
  const double z = s * axis.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 random_rotation(TestRng& rng) {
  return quaternion_rotation(rng.unit_vector() * rng.uniform(0.0, 3.1));
}

PoseParams random_pose(TestRng& rng, double global_angle, double finger_amplitude) {
  Eigen::VectorXd v(pose_size(PoseEncoding::kAxisAngle));
  v.head<3>() = rng.unit_vector() * global_angle * rng.uniform(0.5, 1.0);
  for (Eigen::Index i = 3; i < v.size(); ++i) v[i] = rng.uniform(-finger_amplitude, finger_amplitude);
  return PoseParams(PoseEncoding::kAxisAngle, v);
}

FitScene make_fit_scene(const HandModelAssets& assets, std::uint64_t seed) {
  TestRng rng(seed);
  FitScene scene;
  scene.pose = random_pose(rng, 0.6, 0.3);
  for (int i = 0; i < kShapeCount; ++i) scene.shape.beta[i] = rng.uniform(-1.0, 1.0);
  scene.camera.scale = rng.uniform(800.0, 1000.0);
  scene.camera.translation = Vec2(rng.uniform(108.0, 148.0), rng.uniform(108.0, 148.0));

  // Direct skinning of every vertex, not the fitting keypoint evaluator.
  const Keypoints3 joints = forward_kinematics(assets, scene.pose, scene.shape).joints.joints;
  for (int k = 0; k < kKeypointCount; ++k) {
    scene.landmarks.points(k, 0) = scene.camera.scale * joints(k, 0) + scene.camera.translation.x();
    scene.landmarks.points(k, 1) = scene.camera.scale * joints(k, 1) + scene.camera.translation.y();
  }
  return scene;
}

EigenPairs jacobi_eigen(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  EigenPairs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

double box_iou(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double ciou_oracle(const BBox& p, const BBox& g) {
  const double o = box_iou(p, g);
  const double dx = (p.x1 + p.x2) / 2 - (g.x1 + g.x2) / 2;
  const double dy = (p.y1 + p.y2) / 2 - (g.y1 + g.y2) / 2;
  const double ex = std::max(p.x2, g.x2) - std::min(p.x1, g.x1);
  const double ey = std::max(p.y2, g.y2) - std::min(p.y1, g.y1);
  const double da = std::atan((g.x2 - g.x1) / (g.y2 - g.y1)) - std::atan((p.x2 - p.x1) / (p.y2 - p.y1));
  const double v = 4.0 / (std::numbers::pi * std::numbers::pi) * da * da;
  const double alpha = v == 0.0 ? 0.0 : v / ((1.0 - o) + v);
  return 1.0 - o + (dx * dx + dy * dy) / (ex * ex + ey * ey) + alpha * v;
}

DetectionLossTerms reference_detection_loss(const std::vector<AnchorPrediction>& preds,
                                            const DetectionTargets& targets, const DetectionLossWeights& w) {
  double cls = 0.0;
  double dfl = 0.0;
  double box = 0.0;
  double kp = 0.0;
  int pos = 0;
  int nkp = 0;
  for (std::size_t a = 0; a < preds.size(); ++a) {
    const auto& p = preds[a];
    const int k = targets.assignment[a];
    for (int c = 0; c < 2; ++c) {
      const double y =
          (k >= 0 && static_cast<int>(targets.objects[static_cast<std::size_t>(k)].side) == c) ? 1.0 : 0.0;
      const double s = p.scores[c];
      cls += -(y * std::log(s) + (1 - y) * std::log(1 - s));
    }
    if (k < 0) continue;
    const auto& g = targets.objects[static_cast<std::size_t>(k)];
    const double d[4] = {(p.center.x() - g.box.x1) / p.stride, (p.center.y() - g.box.y1) / p.stride,
                         (g.box.x2 - p.center.x()) / p.stride, (g.box.y2 - p.center.y()) / p.stride};
    double e[4];
    for (int s = 0; s < 4; ++s) {
      const auto& q = p.dfl.sides[static_cast<std::size_t>(s)];
      const int n = static_cast<int>(q.size()) - 1;
      const double t = std::clamp(d[s], 0.0, double(n));
      const int i = std::min(static_cast<int>(std::floor(t)), n - 1);
      dfl += -((i + 1 - t) * std::log(q[i]) + (t - i) * std::log(q[i + 1]));
      e[s] = 0.0;
      for (int b = 0; b <= n; ++b) e[s] += b * q[b];
    }
    const BBox decoded{p.center.x() - p.stride * e[0], p.center.y() - p.stride * e[1],
                       p.center.x() + p.stride * e[2], p.center.y() + p.stride * e[3]};
    box += ciou_oracle(decoded, g.box);
    ++pos;
    if (p.keypoints && g.keypoints) {
      for (int j = 0; j < kKeypointCount; ++j) {
        if (g.visibility && (*g.visibility)[j] == 0) continue;
        const double dx = (*p.keypoints)(j, 0) - (*g.keypoints)(j, 0);
        const double dy = (*p.keypoints)(j, 1) - (*g.keypoints)(j, 1);
        kp += dx * dx + dy * dy;
        ++nkp;
      }
    }
  }
  DetectionLossTerms t;
  t.cls = cls / static_cast<double>(preds.size());
  t.dfl = pos > 0 ? dfl / (4.0 * pos) : 0.0;
  t.box = pos > 0 ? box / pos : 0.0;
  t.keypoints = nkp > 0 ? kp / nkp : 0.0;
  t.total = w.cls * t.cls + w.dfl * t.dfl + w.box * t.box + w.keypoints * t.keypoints;
  return t;
}

namespace {

bool ranks_before(const Detection& a, const Detection& b) {
  const int sa = a.source_id.value_or(-1);
  const int sb = b.source_id.value_or(-1);
  const std::array<double, 7> ka{-a.score, double(sa), a.box.x1, a.box.y1, a.box.x2, a.box.y2, double(a.side)};
  const std::array<double, 7> kb{-b.score, double(sb), b.box.x1, b.box.y1, b.box.x2, b.box.y2, double(b.side)};
  return ka < kb;
}

}  // namespace

std::vector<Detection> reference_nms(std::vector<Detection> dets, double iou_thresh) {
  std::vector<Detection> kept;
  while (!dets.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dets.size(); ++i) {
      if (ranks_before(dets[i], dets[best])) best = i;
    }
    const Detection winner = dets[best];
    std::vector<Detection> rest;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (i == best) continue;
      if (dets[i].side == winner.side && box_iou(dets[i].box, winner.box) >= iou_thresh) continue;
      rest.push_back(dets[i]);
    }
    kept.push_back(winner);
    dets = std::move(rest);
  }
  return kept;
}

double reference_ap(const ImageDetections& dets, const ImageGroundTruth& gts, double iou_thresh) {
  struct Item {
    double score;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t k = 0; k < dets[i].size(); ++k) items.push_back({dets[i][k].score, i, k});
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (items[j].score > items[i].score) std::swap(items[i], items[j]);
    }
  }
  double total = 0.0;
  for (const auto& g : gts) total += static_cast<double>(g.size());

  std::vector<std::vector<int>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), 0);
  std::vector<int> tp(items.size(), 0);
  for (std::size_t r = 0; r < items.size(); ++r) {
    const Detection& d = dets[items[r].image][items[r].index];
    int pick = -1;
    double pick_iou = -1.0;
    for (std::size_t k = 0; k < gts[items[r].image].size(); ++k) {
      const auto& g = gts[items[r].image][k];
      if (used[items[r].image][k] || g.side != d.side) continue;
      const double o = box_iou(d.box, g.box);
      if (o > pick_iou) {
        pick_iou = o;
        pick = static_cast<int>(k);
      }
    }
    if (pick >= 0 && pick_iou >= iou_thresh) {
      used[items[r].image][static_cast<std::size_t>(pick)] = 1;
      tp[r] = 1;
    }
  }

  std::vector<double> precision(items.size());
  int hits = 0;
  for (std::size_t r = 0; r < items.size(); ++r) {
    hits += tp[r];
    precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  double ap = 0.0;
  for (std::size_t r = 0; r < items.size(); ++r) {
    if (!tp[r]) continue;
    double best = 0.0;
    for (std::size_t j = r; j < items.size(); ++j) best = std::max(best, precision[j]);
    ap += best / total;
  }
  return ap;
}

GridPrediction encode_boxes(int grid_h, int grid_w, double stride, int bins, const std::vector<EncodedBox>& boxes) {
  GridPrediction g;
  g.grid_h = grid_h;
  g.grid_w = grid_w;
  g.stride = stride;
  g.bins = bins;
  g.scores = Eigen::MatrixXd::Zero(grid_h * grid_w, 2);
  g.dfl = Eigen::MatrixXd::Constant(grid_h * grid_w, 4 * (bins + 1), 1.0 / (bins + 1));
  for (const auto& b : boxes) {
    const double cx = (b.cell % grid_w + 0.5) * stride;
    const double cy = (b.cell / grid_w + 0.5) * stride;
    const std::array<double, 4> dist{(cx - b.box.x1) / stride, (cy - b.box.y1) / stride, (b.box.x2 - cx) / stride,
                                     (b.box.y2 - cy) / stride};
    g.scores(b.cell, b.side == Side::kRight ? 1 : 0) = b.score;
    for (int s = 0; s < 4; ++s) {
      const double d = dist[static_cast<std::size_t>(s)];
      const int lo = std::min(static_cast<int>(std::floor(d)), bins - 1);
      const double frac = d - lo;
      g.dfl.row(b.cell).segment(s * (bins + 1), bins + 1).setZero();
      g.dfl(b.cell, s * (bins + 1) + lo) = 1.0 - frac;
      g.dfl(b.cell, s * (bins + 1) + lo + 1) = frac;
    }
  }
  return g;
}

double loop_auc(const std::vector<double>& errors, double t_min, double t_max, int steps) {
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = t_min + (t_max - t_min) * k / (steps - 1);
    int below = 0;
    for (double e : errors) below += e <= t ? 1 : 0;
    sum += static_cast<double>(below) / static_cast<double>(errors.size());
  }
  return sum / steps;
}

double loop_f_score(const Points3& pred, const Points3& gt, double tau_mm) {
  const auto covered = [&](const Points3& from, const Points3& to) {
    int n = 0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
      double best = 1e300;
      for (Eigen::Index j = 0; j < to.rows(); ++j) best = std::min(best, (from.row(i) - to.row(j)).norm());
      n += best * 1000.0 <= tau_mm ? 1 : 0;
    }
    return static_cast<double>(n) / static_cast<double>(from.rows());
  };
  const double p = covered(pred, gt);
  const double r = covered(gt, pred);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Eigen::VectorXd loop_bilinear(const FeatureMap& map, double u, double v) {
  const double x = u / map.stride - 0.5;
  const double y = v / map.stride - 0.5;
  const double j0 = std::floor(x);
  const double i0 = std::floor(y);
  const double fx = x - j0;
  const double fy = y - i0;
  const auto texel = [&](double i, double j) {
    const int ii = static_cast<int>(std::clamp(i, 0.0, map.height - 1.0));
    const int jj = static_cast<int>(std::clamp(j, 0.0, map.width - 1.0));
    return Eigen::VectorXd(map.values.row(ii * map.width + jj).transpose());
  };
  Eigen::VectorXd out = Eigen::VectorXd::Zero(map.channels);
  out += (1 - fy) * (1 - fx) * texel(i0, j0);
  out += (1 - fy) * fx * texel(i0, j0 + 1);
  out += fy * (1 - fx) * texel(i0 + 1, j0);
  out += fy * fx * texel(i0 + 1, j0 + 1);
  return out;
}

Eigen::VectorXd loop_sample_mean(const Points3& vertices, const WeakPerspectiveCamera& cam, const FeatureMap& base,
                                 int extra_levels) {
  std::vector<FeatureMap> levels{base};
  for (int k = 0; k < extra_levels; ++k) {
    const FeatureMap& prev = levels.back();
    FeatureMap next{prev.height * 2, prev.width * 2, prev.channels, prev.stride / 2, {}};
    next.values.resize(next.height * next.width, next.channels);
    for (int i = 0; i < next.height; ++i) {
      for (int j = 0; j < next.width; ++j) {
        next.values.row(i * next.width + j) =
            loop_bilinear(prev, (j + 0.5) * next.stride, (i + 0.5) * next.stride).transpose();
      }
    }
    levels.push_back(std::move(next));
  }
  int total = 0;
  for (const auto& l : levels) total += l.channels;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(total);
  for (Eigen::Index r = 0; r < vertices.rows(); ++r) {
    const double u = cam.scale * vertices(r, 0) + cam.translation.x();
    const double v = cam.scale * vertices(r, 1) + cam.translation.y();
    int col = 0;
    for (const auto& l : levels) {
      sum.segment(col, l.channels) += loop_bilinear(l, u, v);
      col += l.channels;
    }
  }
  return sum / static_cast<double>(vertices.rows());
}

FeatureMap random_feature_map(TestRng& rng, int height, int width, int channels, double stride) {
  return FeatureMap{height, width, channels, stride, rng.matrix(height * width, channels, -1.0, 1.0)};
}

}  // namespace handkit::testing
