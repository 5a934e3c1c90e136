#include "handkit/hand_model.hpp"

#include <cmath>
#include <string>

#include "handkit/error.hpp"

namespace handkit {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) fail(Errc::kInvalidAsset, message);
}

// Per-joint blended skinning terms in the form  v' = v + sum_j w_ij (A_j v + c_j)
// with A_j = R_j - I and c_j = delta_j - A_j rest_j, where delta_j is the
// displacement of joint j. At the identity pose A and c vanish exactly, so the
// rest mesh is reproduced bit for bit.
struct SkinningTerms {
  std::array<Mat3, kJointCount> linear;
  Eigen::Matrix<double, kJointCount, 3> offset;
  Eigen::Matrix<double, kJointCount, 3> posed_joints;
};

SkinningTerms skinning_terms(const KinematicTree& tree,
                             const Eigen::Matrix<double, kJointCount, 3>& rest,
                             const PoseParams& pose) {
  SkinningTerms t;
  std::array<Mat3, kJointCount> world;
  std::array<Vec3, kJointCount> delta;
  for (int j = 0; j < kJointCount; ++j) {
    const Mat3 local = pose.rotation(j);
    const int p = tree.parent[static_cast<std::size_t>(j)];
    if (p < 0) {
      world[j] = local;
      delta[j].setZero();
    } else {
      world[j] = world[p] * local;
      const Vec3 bone = (rest.row(j) - rest.row(p)).transpose();
      delta[j] = delta[p] + (world[p] - Mat3::Identity()) * bone;
    }
    t.linear[j] = world[j] - Mat3::Identity();
    t.offset.row(j) = (delta[j] - t.linear[j] * rest.row(j).transpose()).transpose();
    t.posed_joints.row(j) = rest.row(j) + delta[j].transpose();
  }
  return t;
}

Vec3 skin_vertex(const SkinningTerms& t, const Eigen::MatrixXd& weights, Eigen::Index i,
                 const Vec3& v) {
  Vec3 acc = Vec3::Zero();
  for (int j = 0; j < kJointCount; ++j) {
    const double w = weights(i, j);
    if (w == 0.0) continue;
    acc += w * (t.linear[j] * v + t.offset.row(j).transpose());
  }
  return v + acc;
}

void check_inputs(const HandModelAssets& assets, const PoseParams&) {
  const auto v = assets.vertex_count();
  require(assets.tree.joint_count() == kJointCount, "kinematic tree must have 16 joints");
  require(assets.joint_regressor.rows() == kJointCount && assets.joint_regressor.cols() == v,
          "joint regressor dimensions do not match the template");
  require(assets.skin_weights.rows() == v && assets.skin_weights.cols() == kJointCount,
          "skin weight dimensions do not match the template");
  require(assets.shape_basis.size() == kShapeCount, "expected 10 shape basis fields");
  for (const auto& field : assets.shape_basis) {
    require(field.rows() == v, "shape basis field does not match the template");
  }
  for (int tip : assets.tree.fingertip_vertex_ids) {
    require(tip >= 0 && tip < v, "fingertip vertex id out of range");
  }
}

Points3 shaped_template(const HandModelAssets& assets, const ShapeParams& shape) {
  Points3 shaped = assets.template_vertices;
  for (int k = 0; k < kShapeCount; ++k) {
    if (shape.beta[k] != 0.0) shaped += shape.beta[k] * assets.shape_basis[static_cast<std::size_t>(k)];
  }
  return shaped;
}

}  // namespace

void KinematicTree::validate(Eigen::Index vertex_count) const {
  require(!parent.empty(), "kinematic tree is empty");
  require(parent[0] == -1, "joint 0 must be the root (parent -1)");
  for (std::size_t j = 1; j < parent.size(); ++j) {
    require(parent[j] >= 0 && parent[j] < static_cast<int>(j),
            "joint " + std::to_string(j) + " has parent " + std::to_string(parent[j]) +
                "; parents must precede children");
  }
  for (int tip : fingertip_vertex_ids) {
    require(tip >= 0 && tip < vertex_count, "fingertip vertex id " + std::to_string(tip) +
                                                " outside [0, " + std::to_string(vertex_count) + ")");
  }
}

KinematicTree KinematicTree::mano_like(const std::array<int, kFingertipCount>& tips) {
  KinematicTree tree;
  tree.parent = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};
  tree.fingertip_vertex_ids = tips;
  return tree;
}

void HandModelAssets::validate() const {
  const auto v = vertex_count();
  require(v > 0, "template has no vertices");
  require(template_vertices.allFinite(), "template vertices are not finite");
  tree.validate(v);
  const auto j = tree.joint_count();
  require(j == kJointCount, "kinematic tree must have 16 joints");
  require(joint_regressor.rows() == j && joint_regressor.cols() == v,
          "joint regressor must be J x V");
  require(skin_weights.rows() == v && skin_weights.cols() == j, "skin weights must be V x J");
  require(joint_regressor.allFinite() && skin_weights.allFinite(), "non-finite model matrix");
  for (Eigen::Index r = 0; r < j; ++r) {
    require(joint_regressor.row(r).minCoeff() >= 0.0,
            "joint regressor row " + std::to_string(r) + " has a negative entry");
    require(std::abs(joint_regressor.row(r).sum() - 1.0) <= 1e-6,
            "joint regressor row " + std::to_string(r) + " does not sum to 1");
  }
  for (Eigen::Index r = 0; r < v; ++r) {
    require(skin_weights.row(r).minCoeff() >= 0.0,
            "skin weight row " + std::to_string(r) + " has a negative entry");
    require(std::abs(skin_weights.row(r).sum() - 1.0) <= 1e-6,
            "skin weight row " + std::to_string(r) + " does not sum to 1");
  }
  require(shape_basis.size() == kShapeCount, "expected 10 shape basis fields");
  for (const auto& field : shape_basis) {
    require(field.rows() == v && field.allFinite(), "shape basis field must be finite V x 3");
  }
  if (faces.size() > 0) {
    require(faces.minCoeff() >= 0 && faces.maxCoeff() < v, "face references a missing vertex");
  }
}

PoseParams::PoseParams(PoseEncoding encoding, Eigen::VectorXd values)
    : encoding_(encoding), values_(std::move(values)) {
  if (values_.size() != pose_size(encoding_)) {
    fail(Errc::kInvalidArgument, "pose has " + std::to_string(values_.size()) +
                                     " values, encoding requires " +
                                     std::to_string(pose_size(encoding_)));
  }
}

PoseParams PoseParams::identity(PoseEncoding encoding) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(pose_size(encoding));
  if (encoding == PoseEncoding::kRot6d) {
    for (int j = 0; j < kJointCount; ++j) {
      values[6 * j + 0] = 1.0;
      values[6 * j + 4] = 1.0;
    }
  }
  return PoseParams(encoding, std::move(values));
}

Mat3 PoseParams::rotation(int joint) const {
  if (joint < 0 || joint >= kJointCount) fail(Errc::kInvalidArgument, "joint index out of range");
  if (encoding_ == PoseEncoding::kAxisAngle) {
    return axis_angle_to_matrix(values_.segment<3>(3 * joint));
  }
  return rot6d_to_matrix(values_.segment<6>(6 * joint));
}

PoseParams PoseParams::to_encoding(PoseEncoding target) const {
  if (target == encoding_) return *this;
  Eigen::VectorXd out(pose_size(target));
  for (int j = 0; j < kJointCount; ++j) {
    const Mat3 r = rotation(j);
    if (target == PoseEncoding::kAxisAngle) {
      out.segment<3>(3 * j) = matrix_to_axis_angle(r);
    } else {
      out.segment<6>(6 * j) = matrix_to_rot6d(r);
    }
  }
  return PoseParams(target, std::move(out));
}

bool operator==(const PoseParams& a, const PoseParams& b) {
  return a.encoding_ == b.encoding_ && a.values_.size() == b.values_.size() &&
         a.values_ == b.values_;
}

Eigen::Matrix<double, kJointCount, 3> rest_joints(const HandModelAssets& assets,
                                                 const ShapeParams& shape) {
  check_inputs(assets, PoseParams::identity());
  return assets.joint_regressor * shaped_template(assets, shape);
}

ForwardResult forward_kinematics(const HandModelAssets& assets, const PoseParams& pose,
                                 const ShapeParams& shape) {
  check_inputs(assets, pose);
  const Points3 shaped = shaped_template(assets, shape);
  const Eigen::Matrix<double, kJointCount, 3> rest = assets.joint_regressor * shaped;
  const SkinningTerms terms = skinning_terms(assets.tree, rest, pose);
  const Eigen::RowVector3d root = terms.posed_joints.row(0);

  ForwardResult out;
  out.mesh.vertices.resize(shaped.rows(), 3);
  for (Eigen::Index i = 0; i < shaped.rows(); ++i) {
    const Vec3 v = skin_vertex(terms, assets.skin_weights, i, shaped.row(i).transpose());
    out.mesh.vertices.row(i) = v.transpose() - root;
  }
  out.joints.joints.topRows<kJointCount>() = terms.posed_joints.rowwise() - root;
  for (int f = 0; f < kFingertipCount; ++f) {
    out.joints.joints.row(kJointCount + f) =
        out.mesh.vertices.row(assets.tree.fingertip_vertex_ids[static_cast<std::size_t>(f)]);
  }
  return out;
}

JointPositions forward_joints(const HandModelAssets& assets, const PoseParams& pose,
                              const ShapeParams& shape) {
  check_inputs(assets, pose);
  const Points3 shaped = shaped_template(assets, shape);
  const Eigen::Matrix<double, kJointCount, 3> rest = assets.joint_regressor * shaped;
  const SkinningTerms terms = skinning_terms(assets.tree, rest, pose);
  const Eigen::RowVector3d root = terms.posed_joints.row(0);

  JointPositions out;
  out.joints.topRows<kJointCount>() = terms.posed_joints.rowwise() - root;
  for (int f = 0; f < kFingertipCount; ++f) {
    const int id = assets.tree.fingertip_vertex_ids[static_cast<std::size_t>(f)];
    const Vec3 v = skin_vertex(terms, assets.skin_weights, id, shaped.row(id).transpose());
    out.joints.row(kJointCount + f) = v.transpose() - root;
  }
  return out;
}

KeypointModel::KeypointModel(const HandModelAssets& assets) {
  check_inputs(assets, PoseParams::identity());
  tree_ = assets.tree;
  rest_template_ = assets.joint_regressor * assets.template_vertices;
  for (int f = 0; f < kFingertipCount; ++f) {
    const int id = tree_.fingertip_vertex_ids[static_cast<std::size_t>(f)];
    tip_template_.row(f) = assets.template_vertices.row(id);
    tip_weights_.row(f) = assets.skin_weights.row(id);
  }
  for (int k = 0; k < kShapeCount; ++k) {
    const auto& field = assets.shape_basis[static_cast<std::size_t>(k)];
    rest_basis_[static_cast<std::size_t>(k)] = assets.joint_regressor * field;
    for (int f = 0; f < kFingertipCount; ++f) {
      tip_basis_[static_cast<std::size_t>(k)].row(f) =
          field.row(tree_.fingertip_vertex_ids[static_cast<std::size_t>(f)]);
    }
  }
}

JointPositions KeypointModel::evaluate(const PoseParams& pose, const ShapeParams& shape) const {
  JointRows rest = rest_template_;
  TipRows tips = tip_template_;
  for (int k = 0; k < kShapeCount; ++k) {
    const double b = shape.beta[k];
    if (b == 0.0) continue;
    rest += b * rest_basis_[static_cast<std::size_t>(k)];
    tips += b * tip_basis_[static_cast<std::size_t>(k)];
  }
  const SkinningTerms terms = skinning_terms(tree_, rest, pose);
  const Eigen::RowVector3d root = terms.posed_joints.row(0);

  JointPositions out;
  out.joints.topRows<kJointCount>() = terms.posed_joints.rowwise() - root;
  for (int f = 0; f < kFingertipCount; ++f) {
    Vec3 acc = Vec3::Zero();
    const Vec3 v = tips.row(f).transpose();
    for (int j = 0; j < kJointCount; ++j) {
      const double w = tip_weights_(f, j);
      if (w == 0.0) continue;
      acc += w * (terms.linear[j] * v + terms.offset.row(j).transpose());
    }
    out.joints.row(kJointCount + f) = (v + acc).transpose() - root;
  }
  return out;
}

Eigen::VectorXd flatten_points(const Points3& points) {
  Eigen::VectorXd flat(points.rows() * 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) flat.segment<3>(3 * i) = points.row(i).transpose();
  return flat;
}

Points3 unflatten_points(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) fail(Errc::kInvalidArgument, "flattened point count is not a multiple of 3");
  Points3 points(flat.size() / 3, 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) points.row(i) = flat.segment<3>(3 * i).transpose();
  return points;
}

BoneVector bone_lengths(const JointPositions& joints, const KinematicTree& tree) {
  if (tree.joint_count() != kJointCount) fail(Errc::kInvalidArgument, "tree must have 16 joints");
  BoneVector lengths;
  for (int j = 1; j < kJointCount; ++j) {
    const int p = tree.parent[static_cast<std::size_t>(j)];
    lengths[j - 1] = (joints.joints.row(j) - joints.joints.row(p)).norm();
  }
  return lengths;
}

}  // namespace handkit
