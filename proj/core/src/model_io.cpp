#include <cmath>
#include <string>

#include "handkit/error.hpp"
#include "handkit/hand_model.hpp"

namespace handkit {
namespace {

constexpr std::string_view kModelFormat = "model";

std::string basis_name(int k) { return "SHAPE_BASIS_" + std::to_string(k); }

int as_index(double value, std::string_view what) {
  if (!std::isfinite(value) || value != std::floor(value) || std::abs(value) > 1e9) {
    fail(Errc::kParse, std::string(what) + " entry " + format_number(value) + " is not an integer");
  }
  return static_cast<int>(value);
}

}  // namespace

SectionedFile model_to_sectioned(const HandModelAssets& assets) {
  SectionedFile file{std::string(kModelFormat)};
  file.add("TEMPLATE", assets.template_vertices);
  file.add("REGRESSOR", assets.joint_regressor);
  file.add("WEIGHTS", assets.skin_weights);
  for (std::size_t k = 0; k < assets.shape_basis.size(); ++k) {
    file.add(basis_name(static_cast<int>(k)), assets.shape_basis[k]);
  }
  file.add("FACES", assets.faces.cast<double>());
  Eigen::MatrixXd tree(assets.tree.joint_count(), 1);
  for (int j = 0; j < assets.tree.joint_count(); ++j) tree(j, 0) = assets.tree.parent[static_cast<std::size_t>(j)];
  file.add("TREE", tree);
  Eigen::MatrixXd tips(kFingertipCount, 1);
  for (int f = 0; f < kFingertipCount; ++f) tips(f, 0) = assets.tree.fingertip_vertex_ids[static_cast<std::size_t>(f)];
  file.add("TIPS", tips);
  return file;
}

HandModelAssets model_from_sectioned(const SectionedFile& file) {
  if (file.format() != kModelFormat) {
    fail(Errc::kParse, "expected a model file, found format '" + file.format() + "'");
  }
  HandModelAssets assets;
  assets.template_vertices = file.get("TEMPLATE", -1, 3);
  const auto v = assets.template_vertices.rows();
  assets.joint_regressor = file.get("REGRESSOR", -1, v);
  assets.skin_weights = file.get("WEIGHTS", v, -1);
  for (int k = 0; k < kShapeCount; ++k) assets.shape_basis.emplace_back(file.get(basis_name(k), v, 3));

  const auto& faces = file.get("FACES", -1, 3);
  assets.faces.resize(faces.rows(), 3);
  for (Eigen::Index r = 0; r < faces.rows(); ++r) {
    for (int c = 0; c < 3; ++c) assets.faces(r, c) = as_index(faces(r, c), "FACES");
  }
  const auto& tree = file.get("TREE", -1, 1);
  for (Eigen::Index j = 0; j < tree.rows(); ++j) assets.tree.parent.push_back(as_index(tree(j, 0), "TREE"));
  const auto& tips = file.get("TIPS", kFingertipCount, 1);
  for (int f = 0; f < kFingertipCount; ++f) {
    assets.tree.fingertip_vertex_ids[static_cast<std::size_t>(f)] = as_index(tips(f, 0), "TIPS");
  }
  assets.validate();
  return assets;
}

HandModelAssets load_model(const std::filesystem::path& path) {
  return model_from_sectioned(read_sectioned(path, kModelFormat));
}

void save_model(const HandModelAssets& assets, const std::filesystem::path& path) {
  write_sectioned(model_to_sectioned(assets), path);
}

}  // namespace handkit
