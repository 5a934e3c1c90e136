#include "handkit/rotation.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "handkit/error.hpp"

namespace handkit {

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Mat3 axis_angle_to_matrix(const Vec3& axis_angle) {
  if (!axis_angle.allFinite()) fail(Errc::kInvalidArgument, "axis-angle vector is not finite");
  const double theta = axis_angle.norm();
  const Mat3 k = skew(axis_angle);
  if (theta < 1e-8) {
    // Second-order Taylor expansion; the truncation error is O(theta^3).
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 rot6d_to_matrix(const Vec6& r6) {
  if (!r6.allFinite()) fail(Errc::kDegenerateRotation, "6D rotation is not finite");
  const Vec3 a1 = r6.head<3>();
  const Vec3 a2 = r6.tail<3>();
  const double n1 = a1.norm();
  if (n1 <= 1e-8) fail(Errc::kDegenerateRotation, "first 6D column has near-zero norm");
  const double n2 = a2.norm();
  if (n2 <= 1e-8 || a1.cross(a2).norm() <= 1e-8 * n1 * n2) {
    fail(Errc::kDegenerateRotation, "6D columns are parallel or the second is near zero");
  }
  const Vec3 b1 = a1 / n1;
  const Vec3 u2 = a2 - b1.dot(a2) * b1;
  const Vec3 b2 = u2 / u2.norm();
  const Vec3 b3 = b1.cross(b2);
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b3;
  return r;
}

Vec3 matrix_to_axis_angle(const Mat3& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(s, q.w());
  return v * (theta / s);
}

Vec6 matrix_to_rot6d(const Mat3& rotation) {
  Vec6 r6;
  r6.head<3>() = rotation.col(0);
  r6.tail<3>() = rotation.col(1);
  return r6;
}

}  // namespace handkit
