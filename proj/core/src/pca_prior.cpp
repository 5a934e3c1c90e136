#include "handkit/pca_prior.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "handkit/error.hpp"

namespace handkit {

void PcaPrior::validate() const {
  if (basis.cols() != mean.size() || basis.rows() < 1) {
    fail(Errc::kInvalidArgument, "PCA basis must be d x 3V with d >= 1");
  }
  if (!mean.allFinite() || !basis.allFinite()) fail(Errc::kInvalidArgument, "PCA prior is not finite");
  const Eigen::MatrixXd gram = basis * basis.transpose();
  const double err = (gram - Eigen::MatrixXd::Identity(basis.rows(), basis.rows())).cwiseAbs().maxCoeff();
  if (err > 1e-8) fail(Errc::kInvalidArgument, "PCA basis rows are not orthonormal");
}

PcaPrior pca_fit(const Eigen::MatrixXd& meshes, Eigen::Index d) {
  if (d < 1) fail(Errc::kInvalidArgument, "component count must be at least 1");
  const Eigen::Index n = meshes.rows();
  if (n < d + 1) {
    fail(Errc::kRankDeficiency, std::to_string(n) + " meshes cannot support " + std::to_string(d) +
                                    " components");
  }
  if (d > meshes.cols()) fail(Errc::kRankDeficiency, "more components than mesh coordinates");
  if (!meshes.allFinite()) fail(Errc::kInvalidArgument, "mesh corpus is not finite");

  PcaPrior prior;
  prior.mean = meshes.colwise().mean().transpose();
  const Eigen::MatrixXd centered = meshes.rowwise() - prior.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const Eigen::Index m = meshes.cols();

  // Top eigenpairs of the covariance; with fewer samples than coordinates the
  // n x n Gram matrix shares its nonzero spectrum and is far cheaper.
  const bool use_gram = n < m;
  const Eigen::MatrixXd small =
      use_gram ? Eigen::MatrixXd(centered * centered.transpose() / denom)
               : Eigen::MatrixXd(centered.transpose() * centered / denom);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  if (eig.info() != Eigen::Success) fail(Errc::kRankDeficiency, "covariance eigensolver failed");
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const Eigen::Index k_total = values.size();
  const double largest = values[k_total - 1];
  const double tol = std::max(largest, 0.0) * 1e-10 * static_cast<double>(std::max(m, n)) + 1e-300;
  if (!(largest > 0.0) || values[k_total - d] <= tol) {
    fail(Errc::kRankDeficiency, "corpus rank is below " + std::to_string(d) + " components");
  }

  prior.basis.resize(d, m);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::VectorXd u = eig.eigenvectors().col(k_total - 1 - k);
    Eigen::VectorXd row = use_gram ? Eigen::VectorXd(centered.transpose() * u) : u;
    row.normalize();
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < row.size(); ++i) {
      if (std::abs(row[i]) > std::abs(row[pivot])) pivot = i;
    }
    if (row[pivot] < 0.0) row = -row;
    prior.basis.row(k) = row.transpose();
  }
  if (use_gram) {
    // Re-orthonormalize against rounding in the lifted vectors.
    for (Eigen::Index k = 0; k < d; ++k) {
      for (Eigen::Index j = 0; j < k; ++j) {
        prior.basis.row(k) -= prior.basis.row(k).dot(prior.basis.row(j)) * prior.basis.row(j);
      }
      prior.basis.row(k).normalize();
    }
  }
  return prior;
}

double pca_prior_loss(const Eigen::VectorXd& mesh, const PcaPrior& prior) {
  if (mesh.size() != prior.mean.size() || prior.basis.cols() != mesh.size()) {
    fail(Errc::kInvalidArgument, "mesh dimension " + std::to_string(mesh.size()) +
                                     " does not match prior dimension " +
                                     std::to_string(prior.mean.size()));
  }
  const Eigen::VectorXd centered = mesh - prior.mean;
  const Eigen::VectorXd coeffs = prior.basis * centered;
  const Eigen::VectorXd recon = prior.basis.transpose() * coeffs + prior.mean;
  return (mesh - recon).norm();
}

SectionedFile prior_to_sectioned(const PcaPrior& prior) {
  SectionedFile file{"prior"};
  file.add("MEAN", prior.mean.transpose());
  file.add("BASIS", prior.basis);
  return file;
}

PcaPrior prior_from_sectioned(const SectionedFile& file) {
  if (file.format() != "prior") fail(Errc::kParse, "expected a prior file, found " + file.format());
  PcaPrior prior;
  prior.mean = file.get("MEAN", 1, -1).transpose();
  prior.basis = file.get("BASIS", -1, prior.mean.size());
  prior.validate();
  return prior;
}

PcaPrior load_prior(const std::filesystem::path& path) {
  return prior_from_sectioned(read_sectioned(path, "prior"));
}

void save_prior(const PcaPrior& prior, const std::filesystem::path& path) {
  write_sectioned(prior_to_sectioned(prior), path);
}

}  // namespace handkit
