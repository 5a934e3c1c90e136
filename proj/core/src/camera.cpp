#include "handkit/camera.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "handkit/error.hpp"

namespace handkit {
namespace {

SimilarityTransform align(const Points3& source, const Points3& target, bool with_scale) {
  if (source.rows() != target.rows()) {
    fail(Errc::kInvalidArgument, "alignment needs equally sized point sets");
  }
  if (source.rows() < 3) {
    fail(Errc::kDegenerateConfiguration, "alignment needs at least 3 points");
  }
  const double n = static_cast<double>(source.rows());
  const Eigen::RowVector3d mu_s = source.colwise().mean();
  const Eigen::RowVector3d mu_t = target.colwise().mean();
  const Points3 src = source.rowwise() - mu_s;
  const Points3 tgt = target.rowwise() - mu_t;

  const Eigen::JacobiSVD<Eigen::Matrix3d> src_svd(src.transpose() * src);
  const auto spread = src_svd.singularValues();
  if (spread[0] <= 1e-24 || spread[1] <= 1e-12 * spread[0]) {
    fail(Errc::kDegenerateConfiguration, "centered source is coincident or collinear");
  }

  const Mat3 cov = tgt.transpose() * src / n;
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  SimilarityTransform out;
  out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  if (with_scale) {
    const double var_s = src.squaredNorm() / n;
    out.scale = (svd.singularValues().asDiagonal() * d).trace() / var_s;
  } else {
    out.scale = 1.0;
  }
  out.translation = mu_t.transpose() - out.scale * out.rotation * mu_s.transpose();
  return out;
}

}  // namespace

void WeakPerspectiveCamera::validate() const {
  if (!(std::isfinite(scale) && scale > 0.0) || !translation.allFinite()) {
    fail(Errc::kInvalidArgument, "weak-perspective camera needs finite scale > 0 and translation");
  }
}

void IntrinsicCamera::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    fail(Errc::kInvalidArgument, "intrinsic camera needs finite fx, fy > 0");
  }
}

Points3 SimilarityTransform::apply(const Points3& points) const {
  Points3 out = (scale * points * rotation.transpose());
  out.rowwise() += translation.transpose();
  return out;
}

Points2 project_weak(const Points3& points, const WeakPerspectiveCamera& cam) {
  Points2 out = cam.scale * points.leftCols<2>();
  out.rowwise() += cam.translation.transpose();
  return out;
}

Points2 project_perspective(const Points3& points, const IntrinsicCamera& cam) {
  Points2 out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double z = points(i, 2);
    if (!(z > 1e-6)) {
      fail(Errc::kBehindCamera, "point " + std::to_string(i) + " has depth " + format_number(z));
    }
    out(i, 0) = cam.fx * points(i, 0) / z + cam.cx;
    out(i, 1) = cam.fy * points(i, 1) / z + cam.cy;
  }
  return out;
}

SimilarityTransform kabsch_similarity(const Points3& source, const Points3& target) {
  return align(source, target, true);
}

SimilarityTransform kabsch_rigid(const Points3& source, const Points3& target) {
  return align(source, target, false);
}

}  // namespace handkit
