#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"
#include "oracles.hpp"

namespace handkit {
namespace {

using testing::TestRng;

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::kInvalidArgument;
}

BBox random_box(TestRng& rng, double extent = 100.0) {
  const double x = rng.uniform(0.0, extent);
  const double y = rng.uniform(0.0, extent);
  return BBox{x, y, x + rng.uniform(1.0, 40.0), y + rng.uniform(1.0, 40.0)};
}

Eigen::VectorXd one_hot(int n, int k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 1);
  v[k] = 1.0;
  return v;
}

Eigen::VectorXd random_distribution(TestRng& rng, int n) {
  Eigen::VectorXd v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = rng.uniform(0.05, 1.0);
  return v / v.sum();
}

TEST(Box, IouProperties) {
  TestRng rng(41);
  for (int t = 0; t < 1000; ++t) {
    const BBox a = random_box(rng);
    const BBox b = random_box(rng);
    const double o = iou(a, b);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 1.0);
    EXPECT_EQ(o, iou(b, a));
    EXPECT_NEAR(o, testing::box_iou(a, b), 1e-15);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
  EXPECT_EQ(iou(BBox{0, 0, 1, 1}, BBox{2, 2, 3, 3}), 0.0);
  EXPECT_EQ(iou(BBox{0, 0, 1, 1}, BBox{1, 0, 2, 1}), 0.0);
}

TEST(Box, ValidationAndSides) {
  EXPECT_FALSE((BBox{0, 0, -1, 1}).valid());
  EXPECT_EQ(code_of([] { BBox{0, NAN, 1, 1}.validate(); }), Errc::kInvalidBox);
  EXPECT_EQ(parse_side("left"), Side::kLeft);
  EXPECT_STREQ(side_name(Side::kRight), "right");
  EXPECT_EQ(code_of([] { (void)parse_side("up"); }), Errc::kParse);
  const BBox c = BBox::from_center(5, 6, 4, 2);
  EXPECT_EQ(c, (BBox{3, 5, 7, 7}));
}

TEST(Ciou, MatchesTermwiseOracle) {
  TestRng rng(42);
  for (int t = 0; t < 10000; ++t) {
    const BBox a = random_box(rng);
    const BBox b = random_box(rng);
    const double l = ciou_loss(a, b);
    EXPECT_GE(l, 0.0);
    if (t < 1000) {
      EXPECT_NEAR(l, testing::ciou_oracle(a, b), 1e-12);
    }
  }
  const BBox b{1, 2, 11, 7};
  EXPECT_LE(std::abs(ciou_loss(b, b)), 1e-12);
  // Same shape, shifted: aspect term vanishes.
  const BBox s{4, 2, 14, 7};
  EXPECT_NEAR(ciou_loss(s, b), 1.0 - 35.0 / 65.0 + 9.0 / (13.0 * 13.0 + 25.0), 1e-12);
  EXPECT_EQ(code_of([&] { (void)ciou_loss(BBox{0, 0, 0, 5}, b); }), Errc::kInvalidBox);
}

TEST(Dfl, ClosedFormCases) {
  EXPECT_EQ(dfl_loss(one_hot(16, 3), 3.0), 0.0);
  EXPECT_EQ(dfl_loss(one_hot(16, 16), 16.0), 0.0);
  EXPECT_NEAR(dfl_loss(Eigen::VectorXd::Constant(5, 0.2), 2.0), -std::log(0.2), 1e-12);
  Eigen::VectorXd half = Eigen::VectorXd::Zero(5);
  half[2] = half[3] = 0.5;
  EXPECT_NEAR(dfl_loss(half, 2.5), std::log(2.0), 1e-12);
  EXPECT_GT(dfl_loss(half, 2.0), 0.0);
  EXPECT_EQ(code_of([] { (void)dfl_loss(Eigen::VectorXd::Constant(5, 0.2), 4.5); }), Errc::kInvalidTarget);
  EXPECT_EQ(code_of([] { (void)dfl_loss(Eigen::VectorXd::Constant(5, 0.2), -0.1); }), Errc::kInvalidTarget);
}

TEST(Dfl, ExpectationMatchesLoop) {
  EXPECT_EQ(dfl_expectation(one_hot(8, 4)), 4.0);
  EXPECT_NEAR(dfl_expectation(Eigen::VectorXd::Constant(5, 0.2)), 2.0, 1e-15);
  TestRng rng(43);
  for (int t = 0; t < 100; ++t) {
    const auto d = random_distribution(rng, 16);
    double e = 0.0;
    for (int k = 0; k <= 16; ++k) e += k * d[k];
    EXPECT_NEAR(dfl_expectation(d), e, 1e-12);
  }
}

DflDistribution random_dfl(TestRng& rng, int n) {
  DflDistribution d;
  for (auto& s : d.sides) s = random_distribution(rng, n);
  return d;
}

Points2 random_keypoints(TestRng& rng) {
  Points2 k(kKeypointCount, 2);
  for (int i = 0; i < kKeypointCount; ++i) k.row(i) = Vec2(rng.uniform(0, 200), rng.uniform(0, 200)).transpose();
  return k;
}

TEST(DetectionLoss, EqualsWeightedSumOfIndependentTerms) {
  TestRng rng(44);
  const int n = kDefaultDflBins;
  for (int trial = 0; trial < 20; ++trial) {
    DetectionTargets targets;
    for (int o = 0; o < 3; ++o) {
      GroundTruthHand g;
      const double cx = rng.uniform(60, 140);
      const double cy = rng.uniform(60, 140);
      g.box = BBox{cx - rng.uniform(5, 40), cy - rng.uniform(5, 40), cx + rng.uniform(5, 40), cy + rng.uniform(5, 40)};
      g.side = rng.uniform() < 0.5 ? Side::kLeft : Side::kRight;
      g.keypoints = random_keypoints(rng);
      Eigen::VectorXi vis(kKeypointCount);
      for (int i = 0; i < kKeypointCount; ++i) vis[i] = rng.uniform() < 0.7 ? 1 : 0;
      g.visibility = vis;
      targets.objects.push_back(g);
    }
    std::vector<AnchorPrediction> preds;
    for (int a = 0; a < 12; ++a) {
      AnchorPrediction p;
      const int k = a % 4 == 3 ? -1 : a % 3;
      p.stride = a % 2 == 0 ? 8.0 : 16.0;
      if (k >= 0) {
        const auto& b = targets.objects[static_cast<std::size_t>(k)].box;
        p.center = Vec2(rng.uniform(b.x1, b.x2), rng.uniform(b.y1, b.y2));
      } else {
        p.center = Vec2(rng.uniform(0, 200), rng.uniform(0, 200));
      }
      p.scores = Eigen::Vector2d(rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99));
      p.dfl = random_dfl(rng, n);
      if (a % 5 != 0) p.keypoints = random_keypoints(rng);
      preds.push_back(p);
      targets.assignment.push_back(k);
    }

    const auto ref = testing::reference_detection_loss(preds, targets, DetectionLossWeights{0.5, 1.5, 15.0, 10.0});
    const double expected = ref.total;
    const auto out = detection_loss(preds, targets);
    EXPECT_NEAR(out.total(), expected, 1e-12 * std::max(1.0, expected));
    EXPECT_NEAR(out.value("cls"), ref.cls, 1e-12);
    EXPECT_NEAR(out.value("keypoints"), ref.keypoints, 1e-9);
    EXPECT_NEAR(out.value("dfl"), ref.dfl, 1e-12);
    EXPECT_NEAR(out.value("box"), ref.box, 1e-12);
  }
}

TEST(DetectionLoss, ClassificationOnlyCase) {
  AnchorPrediction p;
  p.scores = Eigen::Vector2d(0.5, 1e-300);
  p.dfl = DflDistribution{{one_hot(4, 1), one_hot(4, 1), one_hot(4, 1), one_hot(4, 1)}};
  DetectionTargets t;
  t.assignment = {-1};
  const auto out = detection_loss({p}, t);
  EXPECT_NEAR(out.total(), 0.5 * -std::log(0.5), 1e-12);
  EXPECT_FALSE(out.term("box").present);

  t.assignment = {0};
  EXPECT_EQ(code_of([&] { (void)detection_loss({p}, t); }), Errc::kInvalidArgument);
  t.assignment = {};
  EXPECT_EQ(code_of([&] { (void)detection_loss({p}, t); }), Errc::kInvalidArgument);
}

TEST(DetectionLoss, PerfectPredictionIsZero) {
  GroundTruthHand g;
  g.box = BBox{8, 8, 40, 24};
  g.side = Side::kLeft;
  AnchorPrediction p;
  p.center = Vec2(16, 16);
  p.stride = 8.0;
  p.scores = Eigen::Vector2d(1.0, 0.0);
  p.dfl = DflDistribution{{one_hot(8, 1), one_hot(8, 1), one_hot(8, 3), one_hot(8, 1)}};
  DetectionTargets t{{g}, {0}};
  EXPECT_NEAR(detection_loss({p}, t).total(), 0.0, 1e-10);
}

TEST(Decode, SingleCellByHand) {
  GridPrediction g;
  g.grid_h = 2;
  g.grid_w = 3;
  g.stride = 8.0;
  g.bins = 4;
  g.scores = Eigen::MatrixXd::Zero(6, 2);
  g.dfl = Eigen::MatrixXd::Constant(6, 20, 0.2);
  const int cell = 1 * 3 + 2;  // i = 1, j = 2: center (20, 12)
  g.scores(cell, 0) = 0.9;
  g.scores(cell, 1) = 0.3;
  const int d[4] = {1, 0, 2, 3};
  for (int s = 0; s < 4; ++s) g.dfl.row(cell).segment(5 * s, 5) = one_hot(4, d[s]).transpose();
  const auto dets = decode_grid(g, 0.5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box, (BBox{12, 12, 36, 36}));
  EXPECT_EQ(dets[0].side, Side::kLeft);
  EXPECT_EQ(dets[0].score, 0.9);
  EXPECT_TRUE(decode_grid(g, 0.95).empty());
  EXPECT_TRUE(decode_grid(g, 1.0).empty());
}

TEST(Decode, KeypointOffsetsInCells) {
  auto g = testing::encode_boxes(2, 2, 16.0, 8, {{0, BBox{0, 0, 30, 30}, 0.8, Side::kRight}});
  g.keypoints = Eigen::MatrixXd::Zero(4, 42);
  (*g.keypoints)(0, 0) = 1.0;
  (*g.keypoints)(0, 1) = -0.5;
  const auto dets = decode_grid(g, 0.5);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ((*dets[0].keypoints)(0, 0), 8.0 + 16.0);
  EXPECT_EQ((*dets[0].keypoints)(0, 1), 8.0 - 8.0);
}

TEST(Decode, EncodeDecodeRoundTrip) {
  TestRng rng(45);
  for (int t = 0; t < 200; ++t) {
    const int h = 4 + rng.index(4);
    const int w = 4 + rng.index(4);
    const double stride = 8.0 * (1 + rng.index(3));
    const int cell = rng.index(h * w);
    const double cx = (cell % w + 0.5) * stride;
    const double cy = (cell / w + 0.5) * stride;
    const BBox box{cx - rng.uniform(0, 15) * stride, cy - rng.uniform(0, 15) * stride,
                   cx + rng.uniform(0, 15) * stride, cy + rng.uniform(0, 15) * stride};
    const auto g = testing::encode_boxes(h, w, stride, 16, {{cell, box, 0.7, Side::kRight}});
    const auto dets = decode_grid(g, 0.5);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_LT(std::abs(dets[0].box.x1 - box.x1), 0.5);
    EXPECT_LT(std::abs(dets[0].box.y1 - box.y1), 0.5);
    EXPECT_LT(std::abs(dets[0].box.x2 - box.x2), 0.5);
    EXPECT_LT(std::abs(dets[0].box.y2 - box.y2), 0.5);
  }
}

TEST(Decode, RejectsMalformedGrid) {
  auto g = testing::encode_boxes(2, 2, 8.0, 4, {});
  g.dfl.conservativeResize(4, 19);
  EXPECT_EQ(code_of([&] { (void)decode_grid(g, 0.5); }), Errc::kInvalidArgument);
}

std::vector<Detection> random_scene(TestRng& rng, int n) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    Detection d;
    d.box = random_box(rng, 60.0);
    d.score = std::round(rng.uniform(0, 10)) / 10.0;  // many ties
    d.side = rng.uniform() < 0.5 ? Side::kLeft : Side::kRight;
    if (rng.uniform() < 0.5) d.source_id = rng.index(3);
    dets.push_back(d);
  }
  return dets;
}

bool same_detections(const std::vector<Detection>& a, const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].box == b[i].box) || a[i].score != b[i].score || a[i].side != b[i].side ||
        a[i].source_id != b[i].source_id) {
      return false;
    }
  }
  return true;
}

TEST(Nms, MatchesReferenceAndIgnoresInputOrder) {
  TestRng rng(46);
  for (int t = 0; t < 200; ++t) {
    auto dets = random_scene(rng, 50);
    const double thr = rng.uniform(0.2, 0.8);
    const auto kept = nms(dets, thr);
    EXPECT_TRUE(same_detections(kept, testing::reference_nms(dets, thr)));
    std::reverse(dets.begin(), dets.end());
    EXPECT_TRUE(same_detections(nms(dets, thr), kept));
  }
}

TEST(Nms, SmallCases) {
  Detection a{BBox{0, 0, 10, 10}, 0.9, Side::kRight, {}, {}};
  Detection b = a;
  b.score = 0.8;
  EXPECT_EQ(nms({a}, 0.5).size(), 1u);
  const auto kept = nms({b, a}, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
  b.side = Side::kLeft;
  EXPECT_EQ(nms({a, b}, 0.5).size(), 2u);
}

TEST(Fusion, WorkedExample) {
  const BBox f = fuse_boxes({{BBox{0, 0, 10, 10}, 0.6}, {BBox{2, 2, 12, 12}, 0.2}});
  EXPECT_NEAR(f.x1, 0.5, 1e-12);
  EXPECT_NEAR(f.y1, 0.5, 1e-12);
  EXPECT_NEAR(f.x2, 10.5, 1e-12);
  EXPECT_NEAR(f.y2, 10.5, 1e-12);
  EXPECT_EQ(fuse_boxes({{BBox{1, 2, 3, 4}, 0.3}}), (BBox{1, 2, 3, 4}));
  EXPECT_EQ(code_of([] { (void)fuse_boxes({}); }), Errc::kEmptyInput);
  EXPECT_EQ(code_of([] { (void)fuse_boxes({{BBox{0, 0, 1, 1}, 0.0}}); }), Errc::kZeroMass);
}

TEST(Fusion, OrderAndScaleInvariant) {
  TestRng rng(47);
  for (int t = 0; t < 1000; ++t) {
    std::vector<WeightedBox> m;
    const int n = 1 + rng.index(6);
    for (int i = 0; i < n; ++i) m.push_back({random_box(rng), rng.uniform(0.01, 1.0)});
    const BBox ref = fuse_boxes(m);
    auto shuffled = m;
    std::rotate(shuffled.begin(), shuffled.begin() + rng.index(n), shuffled.end());
    std::reverse(shuffled.begin(), shuffled.end());
    const double k = rng.uniform(0.01, 100.0);
    for (auto& w : shuffled) w.confidence *= k;
    const BBox other = fuse_boxes(shuffled);
    EXPECT_NEAR(other.x1, ref.x1, 1e-12 * 200);
    EXPECT_NEAR(other.y2, ref.y2, 1e-12 * 200);
  }
}

TEST(Fusion, AssociationBasics) {
  const Detection d{BBox{10, 10, 50, 60}, 0.7, Side::kRight, {}, {}};
  const auto same = associate_and_fuse({{d}, {d}, {d}});
  ASSERT_EQ(same.size(), 1u);
  EXPECT_NEAR(same[0].box.x1, d.box.x1, 1e-12);
  EXPECT_NEAR(same[0].box.y2, d.box.y2, 1e-12);
  EXPECT_NEAR(same[0].score, 0.7, 1e-15);

  Detection far = d;
  far.box = BBox{200, 200, 240, 250};
  EXPECT_EQ(associate_and_fuse({{d}, {far}}).size(), 2u);

  Detection left = d;
  left.side = Side::kLeft;
  EXPECT_EQ(associate_and_fuse({{d}, {left}}).size(), 2u);

  // Two boxes from one detector never share a cluster.
  Detection d2 = d;
  d2.score = 0.6;
  EXPECT_EQ(associate_and_fuse({{d, d2}}).size(), 2u);

  Detection tagged = d;
  tagged.source_id = 4;
  const auto single = associate_and_fuse({{tagged}});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_FALSE(single[0].source_id.has_value());
  EXPECT_TRUE(associate_and_fuse({{}, {}}).empty());
}

// Minimum-cluster partition where every cluster is same-side, one member per
// detector and pairwise overlapping at the threshold.
std::vector<std::vector<std::pair<int, int>>> best_partition(const std::vector<std::vector<Detection>>& per, double thr) {
  std::vector<std::pair<int, int>> items;
  for (int s = 0; s < static_cast<int>(per.size()); ++s) {
    for (int k = 0; k < static_cast<int>(per[static_cast<std::size_t>(s)].size()); ++k) items.push_back({s, k});
  }
  const auto at = [&](std::pair<int, int> p) -> const Detection& {
    return per[static_cast<std::size_t>(p.first)][static_cast<std::size_t>(p.second)];
  };
  std::vector<std::vector<std::pair<int, int>>> best;
  std::vector<std::vector<std::pair<int, int>>> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (!best.empty() && cur.size() >= best.size()) return;
    if (i == items.size()) {
      best = cur;
      return;
    }
    for (auto& c : cur) {
      const bool ok = std::all_of(c.begin(), c.end(), [&](std::pair<int, int> m) {
        return m.first != items[i].first && at(m).side == at(items[i]).side &&
               testing::box_iou(at(m).box, at(items[i]).box) >= thr;
      });
      if (!ok) continue;
      c.push_back(items[i]);
      rec(i + 1);
      c.pop_back();
    }
    cur.push_back({items[i]});
    rec(i + 1);
    cur.pop_back();
  };
  rec(0);
  return best;
}

TEST(Fusion, SeparatedTriplesMatchPartitionOracle) {
  TestRng rng(48);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<Detection>> per(3);
    for (int c = 0; c < 2; ++c) {
      const double ox = 100.0 * c + rng.uniform(0, 10);
      const double oy = rng.uniform(0, 10);
      const Side side = rng.uniform() < 0.5 ? Side::kLeft : Side::kRight;
      for (int s = 0; s < 3; ++s) {
        const double j = rng.uniform(-1.5, 1.5);
        per[static_cast<std::size_t>(s)].push_back(
            Detection{BBox{ox + j, oy - j, ox + 30 + j, oy + 40}, rng.uniform(0.1, 1.0), side, {}, {}});
      }
    }
    const auto partition = best_partition(per, 0.5);
    ASSERT_EQ(partition.size(), 2u);
    auto fused = associate_and_fuse(per, 0.5);
    ASSERT_EQ(fused.size(), 2u);
    for (const auto& cluster : partition) {
      std::vector<WeightedBox> members;
      double wsum = 0.0;
      double ssum = 0.0;
      for (auto [s, k] : cluster) {
        const auto& d = per[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
        members.push_back({d.box, d.score});
        wsum += d.score;
        ssum += d.score * d.score;
      }
      const BBox expected = fuse_boxes(members);
      const bool found = std::any_of(fused.begin(), fused.end(), [&](const Detection& f) {
        return std::abs(f.box.x1 - expected.x1) < 1e-9 && std::abs(f.box.y2 - expected.y2) < 1e-9 &&
               std::abs(f.score - ssum / wsum) < 1e-12;
      });
      EXPECT_TRUE(found);
    }
  }
}

}  // namespace
}  // namespace handkit
