#pragma once

#include <Eigen/Core>

#include <filesystem>

#include "handkit/sectioned_file.hpp"

namespace handkit {

/// Linear subspace prior over flattened meshes (x0 y0 z0 x1 ...).
struct PcaPrior {
  Eigen::MatrixXd basis;  // d x 3V, orthonormal rows
  Eigen::VectorXd mean;   // 3V

  [[nodiscard]] Eigen::Index components() const noexcept { return basis.rows(); }
  [[nodiscard]] Eigen::Index dimension() const noexcept { return mean.size(); }
  /// Throws Errc::kInvalidArgument unless rows are orthonormal within 1e-8.
  void validate() const;
};

/// Top-d principal directions of the sample covariance, descending variance.
/// Each row is unit length with its largest-magnitude entry positive (the
/// first such entry on ties). `meshes` holds one flattened mesh per row.
/// Throws Errc::kRankDeficiency when fewer than d+1 samples are given or the
/// d-th eigenvalue is not separated from zero.
[[nodiscard]] PcaPrior pca_fit(const Eigen::MatrixXd& meshes, Eigen::Index d);

/// || X - ([(X - mu) U^T] U + mu) ||_2, the out-of-subspace residual.
[[nodiscard]] double pca_prior_loss(const Eigen::VectorXd& mesh, const PcaPrior& prior);

[[nodiscard]] SectionedFile prior_to_sectioned(const PcaPrior& prior);
[[nodiscard]] PcaPrior prior_from_sectioned(const SectionedFile& file);
[[nodiscard]] PcaPrior load_prior(const std::filesystem::path& path);
void save_prior(const PcaPrior& prior, const std::filesystem::path& path);

}  // namespace handkit
