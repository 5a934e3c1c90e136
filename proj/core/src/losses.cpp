#include "handkit/losses.hpp"

#include <cmath>
#include <numbers>

#include "handkit/error.hpp"

namespace handkit {
namespace {

double hinge2(double value, double lo, double hi) {
  if (value < lo) return (lo - value) * (lo - value);
  if (value > hi) return (value - hi) * (value - hi);
  return 0.0;
}

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(Errc::kInvalidArgument, std::string(what) + ": shape mismatch");
  }
}

}  // namespace

void BmcRanges::validate() const {
  const bool ok = (bone_min.array() <= bone_max.array()).all() && (bone_min.array() > 0.0).all() &&
                  (angle_min.array() <= angle_max.array()).all() && bone_min.allFinite() &&
                  bone_max.allFinite() && angle_min.allFinite() && angle_max.allFinite();
  if (!ok) fail(Errc::kInvalidArgument, "BMC ranges need finite min <= max and bone_min > 0");
}

BmcRanges default_ranges(const HandModelAssets& assets, double bone_slack, double angle_slack) {
  const auto rest = forward_joints(assets, PoseParams::identity(), ShapeParams{});
  const BoneVector lengths = bone_lengths(rest, assets.tree);
  BmcRanges r;
  r.bone_min = (1.0 - bone_slack) * lengths;
  r.bone_max = (1.0 + bone_slack) * lengths;
  r.angle_min.setConstant(-angle_slack);
  r.angle_max.setConstant(angle_slack);
  r.validate();
  return r;
}

SectionedFile ranges_to_sectioned(const BmcRanges& ranges) {
  SectionedFile file{"ranges"};
  file.add("BONE_MIN", ranges.bone_min);
  file.add("BONE_MAX", ranges.bone_max);
  file.add("ANGLE_MIN", ranges.angle_min);
  file.add("ANGLE_MAX", ranges.angle_max);
  return file;
}

BmcRanges ranges_from_sectioned(const SectionedFile& file) {
  if (file.format() != "ranges") fail(Errc::kParse, "expected a ranges file, found " + file.format());
  BmcRanges r;
  r.bone_min = file.get("BONE_MIN", kBoneCount, 1);
  r.bone_max = file.get("BONE_MAX", kBoneCount, 1);
  r.angle_min = file.get("ANGLE_MIN", kBoneCount, 3);
  r.angle_max = file.get("ANGLE_MAX", kBoneCount, 3);
  r.validate();
  return r;
}

BmcRanges load_ranges(const std::filesystem::path& path) {
  return ranges_from_sectioned(read_sectioned(path, "ranges"));
}

void save_ranges(const BmcRanges& ranges, const std::filesystem::path& path) {
  write_sectioned(ranges_to_sectioned(ranges), path);
}

void LossBreakdown::add(std::string id, double value, double weight, bool present) {
  total_ += weight * value;
  terms_.push_back(LossTerm{std::move(id), value, weight, present});
}

const LossTerm& LossBreakdown::term(std::string_view id) const {
  for (const auto& t : terms_) {
    if (t.id == id) return t;
  }
  fail(Errc::kInvalidArgument, "no loss term named " + std::string(id));
}

double reprojection_loss(const Points2& projected, const Points2& detected,
                         const Eigen::VectorXi& visibility) {
  if (projected.rows() != detected.rows() || visibility.size() != projected.rows()) {
    fail(Errc::kInvalidArgument, "reprojection loss inputs have different lengths");
  }
  double sum = 0.0;
  int visible = 0;
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    if (visibility[i] == 0) continue;
    sum += (projected.row(i) - detected.row(i)).cwiseAbs().sum();
    ++visible;
  }
  return visible == 0 ? 0.0 : sum / visible;
}

double bone_length_loss(const BoneVector& lengths, const BmcRanges& ranges) {
  double sum = 0.0;
  for (int j = 0; j < kBoneCount; ++j) sum += hinge2(lengths[j], ranges.bone_min[j], ranges.bone_max[j]);
  return sum;
}

AngleBounds articulation_angles(const PoseParams& pose) {
  AngleBounds angles;
  for (int j = 1; j < kJointCount; ++j) {
    if (pose.encoding() == PoseEncoding::kAxisAngle) {
      angles.row(j - 1) = pose.values().segment<3>(3 * j).transpose();
    } else {
      const Vec3 aa = matrix_to_axis_angle(pose.rotation(j));
      if (aa.norm() > std::numbers::pi - 1e-6) {
        fail(Errc::kDecomposition, "joint " + std::to_string(j) +
                                       " is a half turn; its axis-angle components are ambiguous");
      }
      angles.row(j - 1) = aa.transpose();
    }
  }
  return angles;
}

double joint_angle_loss(const PoseParams& pose, const BmcRanges& ranges) {
  const AngleBounds angles = articulation_angles(pose);
  double sum = 0.0;
  for (int j = 0; j < kBoneCount; ++j) {
    for (int c = 0; c < 3; ++c) sum += hinge2(angles(j, c), ranges.angle_min(j, c), ranges.angle_max(j, c));
  }
  return sum;
}

ReconWeights ReconWeights::training_defaults() {
  return ReconWeights{0.05, 0.01, 0.001, 0.0005, 0.0005};
}

LossBreakdown recon_losses(const ReconInputs& in, const ReconWeights& w) {
  LossBreakdown out;
  bool any = false;

  if (in.pred_vertices && in.gt_vertices) {
    require_same_shape(*in.pred_vertices, *in.gt_vertices, "3D vertex loss");
    const double n = static_cast<double>(in.pred_vertices->size());
    const double v = n > 0 ? (*in.pred_vertices - *in.gt_vertices).cwiseAbs().sum() / n : 0.0;
    out.add("3d", v, w.l3d);
    any = true;
  } else {
    out.add("3d", 0.0, w.l3d, false);
  }

  if (in.pred_joints3d && in.camera && in.gt_joints2d) {
    const Points2 proj = project_weak(*in.pred_joints3d, *in.camera);
    require_same_shape(proj, *in.gt_joints2d, "2D joint loss");
    const double n = static_cast<double>(proj.size());
    out.add("2d", n > 0 ? (proj - *in.gt_joints2d).cwiseAbs().sum() / n : 0.0, w.l2d);
    any = true;
  } else {
    out.add("2d", 0.0, w.l2d, false);
  }

  if (in.pred_pose && in.gt_pose) {
    const auto a = in.pred_pose->to_encoding(PoseEncoding::kAxisAngle);
    const auto b = in.gt_pose->to_encoding(PoseEncoding::kAxisAngle);
    out.add("mano_pose", (a.values() - b.values()).squaredNorm(), w.pose);
    any = true;
  } else {
    out.add("mano_pose", 0.0, w.pose, false);
  }

  if (in.pred_shape && in.gt_shape) {
    out.add("mano_shape", (in.pred_shape->beta - in.gt_shape->beta).squaredNorm(), w.shape);
    any = true;
  } else {
    out.add("mano_shape", 0.0, w.shape, false);
  }

  if (in.d_score) {
    const double d = *in.d_score - 1.0;
    out.add("adv", d * d, w.adv);
    any = true;
  } else {
    out.add("adv", 0.0, w.adv, false);
  }

  if (!any) fail(Errc::kEmptySupervision, "no supervision term is available");
  return out;
}

}  // namespace handkit
