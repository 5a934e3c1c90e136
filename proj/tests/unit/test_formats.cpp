#include <gtest/gtest.h>

#include "handkit/error.hpp"
#include "handkit/formats.hpp"
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

TEST(Formats, LandmarksRoundTrip) {
  TestRng rng(71);
  LandmarkRecord a{"img_a", {}};
  a.landmarks.points = rng.matrix(kKeypointCount, 2, 0, 256);
  a.landmarks.visibility[3] = 0;
  LandmarkRecord b{"img_b", {}};
  b.landmarks.points = rng.matrix(kKeypointCount, 2, 0, 256);
  b.landmarks.intrinsics = IntrinsicCamera{500.5, 501.25, 128.0, 127.0};
  const std::string text = format_landmarks({a, b});
  const auto back = parse_landmarks(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_id, "img_a");
  EXPECT_EQ(back[0].landmarks.points, a.landmarks.points);
  EXPECT_EQ(back[0].landmarks.visibility, a.landmarks.visibility);
  EXPECT_FALSE(back[0].landmarks.intrinsics.has_value());
  ASSERT_TRUE(back[1].landmarks.intrinsics.has_value());
  EXPECT_EQ(back[1].landmarks.intrinsics->fy, 501.25);
  EXPECT_EQ(format_landmarks(back), text);
}

TEST(Formats, LandmarksParseErrors) {
  EXPECT_EQ(code_of([] { (void)parse_landmarks("HANDKIT landmarks v1\nIMAGE a\n1 2 1\n"); }), Errc::kParse);
  EXPECT_EQ(code_of([] { (void)parse_landmarks("HANDKIT detections v1\n"); }), Errc::kParse);
  EXPECT_EQ(code_of([] { (void)parse_landmarks("HANDKIT landmarks v1\n1 2 1\n"); }), Errc::kParse);
}

TEST(Formats, DetectionsRoundTrip) {
  TestRng rng(72);
  DetectionSet set;
  set.images.push_back({"b", 640, 480});
  Detection d1{BBox{1.5, 2.5, 30.125, 40.0}, 0.875, Side::kLeft, {}, 3};
  Detection d2{BBox{10, 10, 20, 20}, 0.1, Side::kRight, Points2(rng.matrix(kKeypointCount, 2, 0, 50)), {}};
  set.records.push_back({"b", d1});
  set.records.push_back({"a", d2});
  const std::string text = format_detections(set);
  const auto back = parse_detections(text);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.images, set.images);
  EXPECT_EQ(back.records[0].detection.source_id, 3);
  EXPECT_EQ(back.records[0].detection.side, Side::kLeft);
  EXPECT_EQ(back.records[0].detection.box.x2, 30.125);
  EXPECT_FALSE(back.records[1].detection.source_id.has_value());
  ASSERT_TRUE(back.records[1].detection.keypoints.has_value());
  EXPECT_EQ(*back.records[1].detection.keypoints, *d2.keypoints);
  EXPECT_EQ(back.image_ids(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(format_detections(back), text);
}

TEST(Formats, DetectionsEdgeCases) {
  EXPECT_TRUE(parse_detections("").records.empty());
  EXPECT_TRUE(parse_detections("  \n").records.empty());
  EXPECT_TRUE(parse_detections("HANDKIT detections v1\n# nothing\n").records.empty());
  EXPECT_EQ(code_of([] { (void)parse_detections("HANDKIT detections v1\nimg - up 0.5 0 0 1 1\n"); }),
            Errc::kParse);
  EXPECT_EQ(code_of([] {
              (void)parse_detections("HANDKIT detections v1\nIMAGE a 10 10\nIMAGE a 20 10\n");
            }),
            Errc::kParse);
  EXPECT_THROW((void)parse_detections("HANDKIT detections v1\nimg - left 0.5 5 0 1 1\n"), Error);
  EXPECT_THROW((void)parse_detections("HANDKIT detections v1\nimg - left 0.5 0 0 1\n"), Error);
}

TEST(Formats, GridsRoundTrip) {
  TestRng rng(73);
  std::vector<GridPrediction> levels;
  for (int k = 0; k < 2; ++k) {
    GridPrediction g;
    g.grid_h = 2 + k;
    g.grid_w = 3;
    g.stride = 8.0 * (k + 1);
    g.bins = 4;
    g.scores = rng.matrix(g.cells(), 2, 0, 1);
    g.dfl = rng.matrix(g.cells(), 4 * (g.bins + 1), -2, 2);
    if (k == 1) g.keypoints = rng.matrix(g.cells(), 42, -3, 3);
    levels.push_back(g);
  }
  const auto back = grids_from_sectioned(parse_sectioned(to_text(grids_to_sectioned(levels)), "grid"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].stride, 16.0);
  EXPECT_EQ(back[1].bins, 4);
  EXPECT_EQ(back[0].dfl, levels[0].dfl);
  EXPECT_FALSE(back[0].keypoints.has_value());
  EXPECT_EQ(*back[1].keypoints, *levels[1].keypoints);
}

TEST(Formats, SequenceAndPosesRoundTrip) {
  TestRng rng(74);
  PoseSequence seq;
  seq.frame_rate = 25.0;
  for (int t = 0; t < 3; ++t) seq.frames.push_back({rng.matrix(kKeypointCount, 3, -1, 1), Points3(rng.matrix(7, 3, -1, 1))});
  const auto sb = sequence_from_sectioned(parse_sectioned(to_text(sequence_to_sectioned(seq)), "sequence"));
  EXPECT_EQ(sb.frame_rate, 25.0);
  ASSERT_EQ(sb.frames.size(), 3u);
  EXPECT_EQ(sb.frames[2].joints, seq.frames[2].joints);
  EXPECT_EQ(*sb.frames[1].vertices, *seq.frames[1].vertices);

  std::vector<NamedPose> poses{{"p0", rng.matrix(kKeypointCount, 3, -1, 1), {}},
                               {"p1", rng.matrix(kKeypointCount, 3, -1, 1), Points3(rng.matrix(9, 3, -1, 1))}};
  const auto pb = poses_from_sectioned(parse_sectioned(to_text(poses_to_sectioned(poses)), "poses"));
  ASSERT_EQ(pb.size(), 2u);
  EXPECT_EQ(pb[0].id, "p0");
  EXPECT_FALSE(pb[0].vertices.has_value());
  EXPECT_EQ(*pb[1].vertices, *poses[1].vertices);
}

TEST(Formats, CorpusParamsFeaturesRoundTrip) {
  TestRng rng(75);
  const Eigen::MatrixXd corpus = rng.matrix(4, 30, -1, 1);
  EXPECT_EQ(corpus_from_sectioned(parse_sectioned(to_text(corpus_to_sectioned(corpus)), "corpus")), corpus);

  HandParams weak;
  weak.pose = testing::random_pose(rng, 1.0, 0.3);
  weak.shape.beta = rng.matrix(10, 1, -1, 1);
  weak.camera = WeakPerspectiveCamera{812.5, Vec2(120.0, 131.0)};
  auto back = params_from_sectioned(parse_sectioned(to_text(params_to_sectioned(weak)), "params"));
  EXPECT_TRUE(back.pose == weak.pose);
  EXPECT_EQ(back.shape, weak.shape);
  ASSERT_TRUE(std::holds_alternative<WeakPerspectiveCamera>(back.camera));
  EXPECT_EQ(std::get<WeakPerspectiveCamera>(back.camera).scale, 812.5);

  HandParams persp;
  persp.pose = weak.pose.to_encoding(PoseEncoding::kRot6d);
  persp.camera = PerspectiveCameraPose{IntrinsicCamera{500, 500, 128, 128}, Vec3(0.01, -0.02, 0.5)};
  back = params_from_sectioned(parse_sectioned(to_text(params_to_sectioned(persp)), "params"));
  EXPECT_EQ(back.pose.encoding(), PoseEncoding::kRot6d);
  EXPECT_EQ(back.pose.values(), persp.pose.values());
  ASSERT_TRUE(std::holds_alternative<PerspectiveCameraPose>(back.camera));
  EXPECT_EQ(std::get<PerspectiveCameraPose>(back.camera).translation.z(), 0.5);

  const Eigen::VectorXd f = rng.matrix(11, 1, -1, 1);
  EXPECT_EQ(features_from_sectioned(parse_sectioned(to_text(features_to_sectioned(f)), "features")), f);
}

TEST(Formats, TraceAndReport) {
  FitResult r;
  r.objective_trace = {3.0, 2.5, 0.125};
  EXPECT_EQ(format_trace(r), "HANDKIT trace v1\niteration,objective\n1,3\n2,2.5\n3,0.125\n");
  EvalReport rep;
  rep.add("ap@0.5", 0.75, "fraction");
  EXPECT_EQ(format_report(rep), "HANDKIT report v1\nap@0.5 0.75 fraction\n");
}

TEST(Formats, WrongMagicIsRejected) {
  const std::string text = to_text(corpus_to_sectioned(Eigen::MatrixXd::Zero(2, 3)));
  EXPECT_EQ(code_of([&] { (void)parse_sectioned(text, "params"); }), Errc::kParse);
}

}  // namespace
}  // namespace handkit
