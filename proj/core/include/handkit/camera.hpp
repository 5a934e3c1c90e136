#pragma once

// Image convention: origin at the top-left corner, +x right, +y down, pixels.

#include <Eigen/Core>

#include "handkit/hand_model.hpp"

namespace handkit {

/// Orthographic projection followed by an isotropic scale and a 2D shift.
struct WeakPerspectiveCamera {
  double scale = 1.0;             // pixels per meter, > 0
  Vec2 translation = Vec2::Zero();  // pixels

  /// Throws Errc::kInvalidArgument unless scale > 0 and all values finite.
  void validate() const;
};

struct IntrinsicCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;
};

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  /// Rows of `points` mapped through s * R * p + t.
  [[nodiscard]] Points3 apply(const Points3& points) const;
};

/// Row i = scale * (x_i, y_i) + translation; depth is discarded.
[[nodiscard]] Points2 project_weak(const Points3& points, const WeakPerspectiveCamera& cam);

/// Pinhole projection. Throws Errc::kBehindCamera naming the first row with z <= 1e-6.
[[nodiscard]] Points2 project_perspective(const Points3& points, const IntrinsicCamera& cam);

/// Least-squares similarity mapping `source` onto `target` (Umeyama).
/// Reflections are removed by flipping the weakest singular direction.
/// Throws Errc::kDegenerateConfiguration for fewer than 3 points or a
/// coincident/collinear centered source.
[[nodiscard]] SimilarityTransform kabsch_similarity(const Points3& source, const Points3& target);

/// Same as kabsch_similarity with the scale pinned to 1.
[[nodiscard]] SimilarityTransform kabsch_rigid(const Points3& source, const Points3& target);

}  // namespace handkit
