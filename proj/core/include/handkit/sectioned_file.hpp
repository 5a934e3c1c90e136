#pragma once

// Self-describing text container shared by every on-disk format.
//
//   HANDKIT <format> v1
//   SECTION <name> <rows> <cols>
//   <rows x cols whitespace-separated decimals, one row per line>
//   SECTION ...
//
// Numbers are written with 17 significant digits so a write/read cycle
// reproduces every double bit for bit.

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace handkit {

struct Section {
  std::string name;
  Eigen::MatrixXd values;
};

class SectionedFile {
 public:
  explicit SectionedFile(std::string format);

  [[nodiscard]] const std::string& format() const noexcept { return format_; }
  [[nodiscard]] const std::vector<Section>& sections() const noexcept { return sections_; }

  /// Appends a section; names must be unique and free of whitespace.
  void add(std::string name, Eigen::MatrixXd values);
  [[nodiscard]] bool contains(std::string_view name) const;
  /// Throws Errc::kParse naming the missing section.
  [[nodiscard]] const Eigen::MatrixXd& get(std::string_view name) const;
  /// Like get(), additionally checking the shape (-1 skips a dimension).
  [[nodiscard]] const Eigen::MatrixXd& get(std::string_view name, Eigen::Index rows,
                                           Eigen::Index cols) const;

 private:
  std::string format_;
  std::vector<Section> sections_;
};

/// Parses a container; if expected_format is non-empty the magic line must name it.
[[nodiscard]] SectionedFile parse_sectioned(std::string_view text,
                                            std::string_view expected_format = {});
[[nodiscard]] std::string to_text(const SectionedFile& file);

[[nodiscard]] SectionedFile read_sectioned(const std::filesystem::path& path,
                                           std::string_view expected_format = {});
void write_sectioned(const SectionedFile& file, const std::filesystem::path& path);

/// Shortest-exact style formatting: 17 significant digits, locale independent.
[[nodiscard]] std::string format_number(double value);
/// Strict full-token parse; throws Errc::kParse with `context` on failure.
[[nodiscard]] double parse_number(std::string_view token, std::string_view context);
[[nodiscard]] long long parse_integer(std::string_view token, std::string_view context);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// Splits on ASCII whitespace.
[[nodiscard]] std::vector<std::string_view> split_whitespace(std::string_view line);
/// Splits into lines, dropping a trailing '\r' from each.
[[nodiscard]] std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace handkit
