#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>

#include "handkit/error.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/rotation.hpp"
#include "oracles.hpp"

namespace handkit {
namespace {

using testing::TestRng;

const HandModelAssets& small_model() {
  static const HandModelAssets assets = synth_model(3, 200);
  return assets;
}

TEST(Rotation, AxisAngleMatchesQuaternionOracle) {
  TestRng rng(11);
  for (int t = 0; t < 200; ++t) {
    const Vec3 aa = rng.unit_vector() * rng.uniform(0.0, 3.14);
    EXPECT_LT((axis_angle_to_matrix(aa) - testing::quaternion_rotation(aa)).norm(), 1e-12);
  }
  EXPECT_EQ(axis_angle_to_matrix(Vec3::Zero()), Mat3::Identity());
}

TEST(Rotation, SmallAnglesStayOrthonormal) {
  const Mat3 r = axis_angle_to_matrix(Vec3(1e-12, -2e-12, 5e-13));
  EXPECT_LT((r * r.transpose() - Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT((r - Mat3::Identity() - skew(Vec3(1e-12, -2e-12, 5e-13))).norm(), 1e-20);
}

TEST(Rotation, LogMapInvertsExpMap) {
  TestRng rng(12);
  for (int t = 0; t < 200; ++t) {
    const Vec3 aa = rng.unit_vector() * rng.uniform(0.0, 3.1);
    EXPECT_LT((matrix_to_axis_angle(axis_angle_to_matrix(aa)) - aa).norm(), 1e-9);
  }
  const Vec3 half_turn = Vec3(0.0, 0.6, 0.8) * std::numbers::pi;
  const Vec3 back = matrix_to_axis_angle(axis_angle_to_matrix(half_turn));
  EXPECT_NEAR(back.norm(), std::numbers::pi, 1e-9);
  EXPECT_LT((axis_angle_to_matrix(back) - axis_angle_to_matrix(half_turn)).norm(), 1e-9);
}

TEST(Rotation, SixDRoundTripAndGramSchmidt) {
  TestRng rng(13);
  for (int t = 0; t < 100; ++t) {
    const Mat3 r = testing::random_rotation(rng);
    EXPECT_LT((rot6d_to_matrix(matrix_to_rot6d(r)) - r).norm(), 1e-12);
  }
  Vec6 raw;
  raw << 2.0, 0.0, 0.0, 1.0, 3.0, 0.0;
  const Mat3 r = rot6d_to_matrix(raw);
  EXPECT_LT((r - Mat3::Identity()).norm(), 1e-15);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-15);
}

TEST(Rotation, SixDDegenerateInputs) {
  Vec6 parallel;
  parallel << 1.0, 0.0, 0.0, 2.0, 0.0, 0.0;
  EXPECT_THROW((void)rot6d_to_matrix(parallel), Error);
  Vec6 zero = Vec6::Zero();
  try {
    (void)rot6d_to_matrix(zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDegenerateRotation);
  }
}

TEST(Rotation, NonFiniteAxisAngleRejected) {
  EXPECT_THROW((void)axis_angle_to_matrix(Vec3(NAN, 0.0, 0.0)), Error);
}

TEST(SynthModel, DeterministicAndValid) {
  const auto a = synth_model(5, 120);
  const auto b = synth_model(5, 120);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.template_vertices, b.template_vertices);
  EXPECT_EQ(a.skin_weights, b.skin_weights);
  EXPECT_EQ(a.joint_regressor, b.joint_regressor);
  EXPECT_EQ(a.faces, b.faces);
  EXPECT_NE(synth_model(6, 120).template_vertices, a.template_vertices);
  EXPECT_EQ(a.vertex_count(), 120);
  EXPECT_THROW((void)synth_model(1, 10), Error);
}

TEST(SynthModel, WeightRowsSumToOne) {
  const auto& m = small_model();
  EXPECT_LT((m.skin_weights.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_LT((m.joint_regressor.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_GE(m.skin_weights.minCoeff(), 0.0);
}

TEST(HandModel, ValidateRejectsBrokenAssets) {
  auto broken = small_model();
  broken.skin_weights(0, 0) += 0.5;
  EXPECT_THROW(broken.validate(), Error);

  auto bad_tree = small_model();
  bad_tree.tree.parent[3] = 7;
  EXPECT_THROW(bad_tree.validate(), Error);

  auto bad_tip = small_model();
  bad_tip.tree.fingertip_vertex_ids[0] = 100000;
  EXPECT_THROW(bad_tip.validate(), Error);
}

TEST(HandModel, IdentityPoseGivesShiftedRestJoints) {
  const auto& m = small_model();
  const ShapeParams shape;
  const auto fk = forward_kinematics(m, PoseParams::identity(), shape);
  const auto rest = rest_joints(m, shape);
  for (int j = 0; j < kJointCount; ++j) {
    EXPECT_LT((fk.joints.joints.row(j) - (rest.row(j) - rest.row(0))).norm(), 1e-12);
  }
  EXPECT_LT(fk.joints.joints.row(0).norm(), 1e-15);
  for (int k = 0; k < kFingertipCount; ++k) {
    const int v = m.tree.fingertip_vertex_ids[static_cast<std::size_t>(k)];
    EXPECT_LT((fk.joints.joints.row(kJointCount + k) - fk.mesh.vertices.row(v)).norm(), 1e-15);
  }
}

TEST(HandModel, GlobalRotationRotatesEverything) {
  const auto& m = small_model();
  TestRng rng(21);
  PoseParams pose = testing::random_pose(rng, 0.0, 0.3);
  const auto base = forward_kinematics(m, pose, ShapeParams{});
  Eigen::VectorXd v = pose.values();
  const Vec3 global = rng.unit_vector() * 1.1;
  v.head<3>() = global;
  const auto rotated = forward_kinematics(m, PoseParams(PoseEncoding::kAxisAngle, v), ShapeParams{});
  const Mat3 r = testing::quaternion_rotation(global);
  const Points3 expected = base.mesh.vertices * r.transpose();
  EXPECT_LT((rotated.mesh.vertices - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HandModel, BonesPreservedUnderArticulation) {
  const auto& m = small_model();
  TestRng rng(22);
  const ShapeParams shape;
  const BoneVector rest = bone_lengths(forward_joints(m, PoseParams::identity(), shape), m.tree);
  for (int t = 0; t < 10; ++t) {
    const auto pose = testing::random_pose(rng, 1.0, 0.8);
    const BoneVector posed = bone_lengths(forward_joints(m, pose, shape), m.tree);
    EXPECT_LT((posed - rest).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(HandModel, KeypointModelAgreesWithFullForwardPass) {
  const auto& m = small_model();
  const KeypointModel km(m);
  TestRng rng(23);
  for (int t = 0; t < 10; ++t) {
    const auto pose = testing::random_pose(rng, 1.0, 0.5);
    ShapeParams shape;
    for (int i = 0; i < kShapeCount; ++i) shape.beta[i] = rng.uniform(-2.0, 2.0);
    const auto full = forward_kinematics(m, pose, shape).joints.joints;
    EXPECT_LT((km.evaluate(pose, shape).joints - full).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((forward_joints(m, pose, shape).joints - full).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(HandModel, EncodingsGiveTheSameMesh) {
  const auto& m = small_model();
  TestRng rng(24);
  const auto aa = testing::random_pose(rng, 1.5, 0.7);
  const auto r6 = aa.to_encoding(PoseEncoding::kRot6d);
  EXPECT_EQ(r6.values().size(), pose_size(PoseEncoding::kRot6d));
  const auto a = forward_kinematics(m, aa, ShapeParams{}).mesh.vertices;
  const auto b = forward_kinematics(m, r6, ShapeParams{}).mesh.vertices;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r6.to_encoding(PoseEncoding::kAxisAngle).values() - aa.values()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(HandModel, ShapeEntersLinearlyAtRest) {
  const auto& m = small_model();
  ShapeParams a;
  ShapeParams b;
  a.beta[2] = 1.0;
  b.beta[2] = 2.0;
  const auto zero = forward_kinematics(m, PoseParams::identity(), ShapeParams{}).mesh.vertices;
  const auto one = forward_kinematics(m, PoseParams::identity(), a).mesh.vertices;
  const auto two = forward_kinematics(m, PoseParams::identity(), b).mesh.vertices;
  EXPECT_LT(((two - one) - (one - zero)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HandModel, PoseLengthChecked) {
  EXPECT_THROW(PoseParams(PoseEncoding::kAxisAngle, Eigen::VectorXd::Zero(47)), Error);
  EXPECT_THROW(PoseParams(PoseEncoding::kRot6d, Eigen::VectorXd::Zero(48)), Error);
}

TEST(HandModel, FlattenRoundTrip) {
  TestRng rng(25);
  const Points3 p = rng.matrix(7, 3, -1.0, 1.0);
  const Eigen::VectorXd flat = flatten_points(p);
  EXPECT_EQ(flat[3], p(1, 0));
  EXPECT_EQ(unflatten_points(flat), p);
  EXPECT_THROW((void)unflatten_points(Eigen::VectorXd::Zero(4)), Error);
}

TEST(HandModel, ModelFileRoundTripIsExact) {
  const auto& m = small_model();
  const std::string text = to_text(model_to_sectioned(m));
  const auto back = model_from_sectioned(parse_sectioned(text, "model"));
  EXPECT_EQ(back.template_vertices, m.template_vertices);
  EXPECT_EQ(back.joint_regressor, m.joint_regressor);
  EXPECT_EQ(back.skin_weights, m.skin_weights);
  EXPECT_EQ(back.faces, m.faces);
  EXPECT_EQ(back.tree.parent, m.tree.parent);
  EXPECT_EQ(back.tree.fingertip_vertex_ids, m.tree.fingertip_vertex_ids);
  for (int i = 0; i < kShapeCount; ++i) EXPECT_EQ(back.shape_basis[static_cast<std::size_t>(i)], m.shape_basis[static_cast<std::size_t>(i)]);
  EXPECT_EQ(to_text(model_to_sectioned(back)), text);
}

TEST(SectionedFile, ParsesAndReportsErrors) {
  const auto f = parse_sectioned("HANDKIT demo v1\nSECTION A 2 2\n1 2\n3 4.5\nSECTION B 0 3\n", "demo");
  EXPECT_EQ(f.get("A")(1, 1), 4.5);
  EXPECT_EQ(f.get("B").rows(), 0);
  EXPECT_THROW((void)parse_sectioned("HANDKIT demo v2\n", "demo"), Error);
  EXPECT_THROW((void)parse_sectioned("HANDKIT demo v1\n", "other"), Error);
  EXPECT_THROW((void)parse_sectioned("HANDKIT demo v1\nSECTION A 2 2\n1 2 3\n", "demo"), Error);
  EXPECT_THROW((void)parse_sectioned("HANDKIT demo v1\nSECTION A 1 1\nx\n", "demo"), Error);
  EXPECT_THROW((void)parse_sectioned("HANDKIT demo v1\nSECTION A 1 1\n1\nSECTION A 1 1\n2\n", "demo"), Error);
  EXPECT_THROW((void)f.get("A", 3, 2), Error);
}

TEST(SectionedFile, SeventeenDigitsRoundTrip) {
  TestRng rng(26);
  for (int t = 0; t < 1000; ++t) {
    const double x = std::ldexp(rng.uniform(-1.0, 1.0), rng.index(200) - 100);
    EXPECT_EQ(parse_number(format_number(x), ""), x);
  }
}

}  // namespace
}  // namespace handkit
