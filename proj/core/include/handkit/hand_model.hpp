#pragma once

// Parametric hand model: asset container, pose/shape parameters, and the
// linear blend skinning forward pass.
//
// Keypoint convention (21 rows): the 16 kinematic joints in tree order
// (0 wrist; 1-3 index; 4-6 middle; 7-9 pinky; 10-12 ring; 13-15 thumb)
// followed by the 5 fingertip vertices in the same finger order.
//
// The posed output is translated so the root joint sits at the origin; any
// global translation belongs to the camera.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "handkit/rotation.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit {

inline constexpr int kJointCount = 16;
inline constexpr int kBoneCount = kJointCount - 1;
inline constexpr int kFingertipCount = 5;
inline constexpr int kKeypointCount = kJointCount + kFingertipCount;
inline constexpr int kShapeCount = 10;

using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;
using BoneVector = Eigen::Matrix<double, kBoneCount, 1>;
using ShapeVector = Eigen::Matrix<double, kShapeCount, 1>;
using Keypoints3 = Eigen::Matrix<double, kKeypointCount, 3>;

struct KinematicTree {
  /// parent[0] == -1; parent[j] < j otherwise.
  std::vector<int> parent;
  /// Vertices appended after the kinematic joints to form 21 keypoints.
  std::array<int, kFingertipCount> fingertip_vertex_ids{};

  [[nodiscard]] int joint_count() const noexcept { return static_cast<int>(parent.size()); }
  /// Throws Errc::kInvalidAsset.
  void validate(Eigen::Index vertex_count) const;

  /// Wrist plus three joints per finger, MANO ordering.
  [[nodiscard]] static KinematicTree mano_like(const std::array<int, kFingertipCount>& tips);
};

struct HandModelAssets {
  Points3 template_vertices;          // V x 3, meters
  Eigen::MatrixXd joint_regressor;    // J x V, rows sum to 1
  Eigen::MatrixXd skin_weights;       // V x J, rows sum to 1
  std::vector<Points3> shape_basis;   // kShapeCount fields of V x 3
  Faces faces;                        // F x 3
  KinematicTree tree;

  [[nodiscard]] Eigen::Index vertex_count() const noexcept { return template_vertices.rows(); }
  /// Checks every structural invariant; throws Errc::kInvalidAsset.
  void validate() const;
};

enum class PoseEncoding { kAxisAngle, kRot6d };

[[nodiscard]] constexpr int pose_stride(PoseEncoding e) noexcept {
  return e == PoseEncoding::kAxisAngle ? 3 : 6;
}
[[nodiscard]] constexpr int pose_size(PoseEncoding e) noexcept {
  return kJointCount * pose_stride(e);
}

/// 16 rotations, the first being the global orientation.
class PoseParams {
 public:
  /// Throws Errc::kInvalidArgument if the length does not match the encoding.
  PoseParams(PoseEncoding encoding, Eigen::VectorXd values);

  [[nodiscard]] static PoseParams identity(PoseEncoding encoding = PoseEncoding::kAxisAngle);

  [[nodiscard]] PoseEncoding encoding() const noexcept { return encoding_; }
  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
  [[nodiscard]] Mat3 rotation(int joint) const;
  /// Converts through rotation matrices; axis-angle output uses angles in [0, pi].
  [[nodiscard]] PoseParams to_encoding(PoseEncoding target) const;

  friend bool operator==(const PoseParams& a, const PoseParams& b);

 private:
  PoseEncoding encoding_;
  Eigen::VectorXd values_;
};

struct ShapeParams {
  ShapeVector beta = ShapeVector::Zero();
  friend bool operator==(const ShapeParams& a, const ShapeParams& b) { return a.beta == b.beta; }
};

/// Faces are shared with the generating HandModelAssets.
struct HandMesh {
  Points3 vertices;
};

struct JointPositions {
  Keypoints3 joints = Keypoints3::Zero();
};

struct ForwardResult {
  HandMesh mesh;
  JointPositions joints;
};

/// Shape blendshapes, joint regression, kinematic chain, linear blend skinning.
/// Throws Errc::kInvalidAsset on dimension mismatches.
[[nodiscard]] ForwardResult forward_kinematics(const HandModelAssets& assets,
                                               const PoseParams& pose,
                                               const ShapeParams& shape);

/// Same keypoints as forward_kinematics, skinning only the fingertip vertices.
[[nodiscard]] JointPositions forward_joints(const HandModelAssets& assets,
                                            const PoseParams& pose,
                                            const ShapeParams& shape);

/// Keypoint evaluator with the shape-linear parts precomputed: rest joints and
/// fingertip rows are linear in beta, so evaluation cost does not depend on V.
/// Agrees with forward_joints up to rounding.
class KeypointModel {
 public:
  explicit KeypointModel(const HandModelAssets& assets);

  [[nodiscard]] JointPositions evaluate(const PoseParams& pose, const ShapeParams& shape) const;
  [[nodiscard]] const KinematicTree& tree() const noexcept { return tree_; }

 private:
  using JointRows = Eigen::Matrix<double, kJointCount, 3>;
  using TipRows = Eigen::Matrix<double, kFingertipCount, 3>;

  KinematicTree tree_;
  JointRows rest_template_;
  std::array<JointRows, kShapeCount> rest_basis_;
  TipRows tip_template_;
  std::array<TipRows, kShapeCount> tip_basis_;
  Eigen::Matrix<double, kFingertipCount, kJointCount> tip_weights_;
};

/// Rest joints (16 x 3) of the shaped template, before the root shift.
[[nodiscard]] Eigen::Matrix<double, kJointCount, 3> rest_joints(const HandModelAssets& assets,
                                                                const ShapeParams& shape);

/// Distance from each non-root joint to its parent, joints 1..15 in order.
[[nodiscard]] BoneVector bone_lengths(const JointPositions& joints, const KinematicTree& tree);

/// Row-major flattening (x0 y0 z0 x1 ...) used by mesh priors.
[[nodiscard]] Eigen::VectorXd flatten_points(const Points3& points);
[[nodiscard]] Points3 unflatten_points(const Eigen::VectorXd& flat);

/// Deterministic, license-free stand-in for the MANO asset with the same
/// structure. Throws Errc::kInvalidArgument for vertex_count < 30.
[[nodiscard]] HandModelAssets synth_model(std::uint64_t seed, int vertex_count);

[[nodiscard]] SectionedFile model_to_sectioned(const HandModelAssets& assets);
/// Throws Errc::kParse for structural problems and Errc::kInvalidAsset for
/// invariant violations.
[[nodiscard]] HandModelAssets model_from_sectioned(const SectionedFile& file);
[[nodiscard]] HandModelAssets load_model(const std::filesystem::path& path);
void save_model(const HandModelAssets& assets, const std::filesystem::path& path);

}  // namespace handkit
