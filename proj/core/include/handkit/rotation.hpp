#pragma once

#include <Eigen/Core>

namespace handkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Rodrigues' formula. Throws Errc::kInvalidArgument on non-finite input.
[[nodiscard]] Mat3 axis_angle_to_matrix(const Vec3& axis_angle);

/// Continuous 6D representation: the first two columns of a rotation matrix,
/// stacked (c0, c1). Gram-Schmidt orthonormalizes them and completes the frame
/// with a cross product. Throws Errc::kDegenerateRotation when the first column
/// is shorter than 1e-8 or the two columns are parallel within 1e-8 (sine of
/// the angle between them).
[[nodiscard]] Mat3 rot6d_to_matrix(const Vec6& r6);

/// Logarithm map; the returned angle lies in [0, pi].
[[nodiscard]] Vec3 matrix_to_axis_angle(const Mat3& rotation);

/// First two columns of `rotation`.
[[nodiscard]] Vec6 matrix_to_rot6d(const Mat3& rotation);

[[nodiscard]] Mat3 skew(const Vec3& v);

}  // namespace handkit
