#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "handkit/camera.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit {

using AngleBounds = Eigen::Matrix<double, kBoneCount, 3>;

/// Feasible intervals for bone lengths (meters) and per-axis articulation
/// (radians, axis-angle components of joints 1..15).
struct BmcRanges {
  BoneVector bone_min = BoneVector::Zero();
  BoneVector bone_max = BoneVector::Zero();
  AngleBounds angle_min = AngleBounds::Zero();
  AngleBounds angle_max = AngleBounds::Zero();

  /// Throws Errc::kInvalidArgument unless min <= max and bone_min > 0.
  void validate() const;
};

/// Rest bone lengths of `assets` (zero shape) scaled by 1 -/+ bone_slack, and
/// +/- angle_slack on every articulation axis.
[[nodiscard]] BmcRanges default_ranges(const HandModelAssets& assets, double bone_slack = 0.25,
                                       double angle_slack = 1.5707963267948966);

[[nodiscard]] SectionedFile ranges_to_sectioned(const BmcRanges& ranges);
[[nodiscard]] BmcRanges ranges_from_sectioned(const SectionedFile& file);
[[nodiscard]] BmcRanges load_ranges(const std::filesystem::path& path);
void save_ranges(const BmcRanges& ranges, const std::filesystem::path& path);

struct LossTerm {
  std::string id;
  double value = 0.0;
  double weight = 1.0;
  bool present = true;
};

/// Ordered named terms; total() is the weighted sum of the terms.
class LossBreakdown {
 public:
  void add(std::string id, double value, double weight = 1.0, bool present = true);

  [[nodiscard]] const std::vector<LossTerm>& terms() const noexcept { return terms_; }
  [[nodiscard]] double total() const noexcept { return total_; }
  /// Throws Errc::kInvalidArgument for an unknown id.
  [[nodiscard]] const LossTerm& term(std::string_view id) const;
  [[nodiscard]] double value(std::string_view id) const { return term(id).value; }

 private:
  std::vector<LossTerm> terms_;
  double total_ = 0.0;
};

/// Mean over visible landmarks of the L1 norm of the 2D difference; 0 if none
/// is visible.
[[nodiscard]] double reprojection_loss(const Points2& projected, const Points2& detected,
                                       const Eigen::VectorXi& visibility);

/// Quadratic hinge outside [bone_min, bone_max], summed over bones.
[[nodiscard]] double bone_length_loss(const BoneVector& lengths, const BmcRanges& ranges);

/// Per-joint articulation components used by joint_angle_loss: the axis-angle
/// values of joints 1..15. 6D poses go through the logarithm map and raise
/// Errc::kDecomposition when a rotation is within 1e-6 rad of a half turn.
[[nodiscard]] AngleBounds articulation_angles(const PoseParams& pose);

/// Quadratic hinge on each articulation component outside its interval.
[[nodiscard]] double joint_angle_loss(const PoseParams& pose, const BmcRanges& ranges);

/// Supervision for the reconstruction objective. Any pair may be absent.
struct ReconInputs {
  std::optional<Points3> pred_vertices;
  std::optional<Points3> gt_vertices;
  std::optional<Points3> pred_joints3d;
  std::optional<WeakPerspectiveCamera> camera;
  std::optional<Points2> gt_joints2d;
  std::optional<PoseParams> pred_pose;
  std::optional<PoseParams> gt_pose;
  std::optional<ShapeParams> pred_shape;
  std::optional<ShapeParams> gt_shape;
  /// Discriminator output, supplied externally.
  std::optional<double> d_score;
};

struct ReconWeights {
  double l3d = 1.0;
  double l2d = 1.0;
  double pose = 1.0;
  double shape = 1.0;
  double adv = 1.0;

  /// 0.05 / 0.01 / 0.001 / 0.0005 / 0.0005, the published training balance.
  [[nodiscard]] static ReconWeights training_defaults();
};

/// Terms "3d" (mean absolute vertex coordinate error), "2d" (mean absolute
/// error of the weak-perspective projection against 2D joints), "mano_pose"
/// and "mano_shape" (squared L2 in axis-angle encoding; their sum is the MANO
/// parameter loss) and "adv" ((d_score - 1)^2). Absent terms are recorded with
/// present = false and value 0. Throws Errc::kEmptySupervision if every term
/// is absent.
[[nodiscard]] LossBreakdown recon_losses(const ReconInputs& inputs,
                                         const ReconWeights& weights = {});

}  // namespace handkit
