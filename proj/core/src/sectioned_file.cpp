#include "handkit/sectioned_file.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "handkit/error.hpp"

namespace handkit {
namespace {

constexpr std::string_view kMagic = "HANDKIT";
constexpr std::string_view kVersion = "v1";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

}  // namespace

SectionedFile::SectionedFile(std::string format) : format_(std::move(format)) {
  if (format_.empty() || std::any_of(format_.begin(), format_.end(), is_space)) {
    fail(Errc::kInvalidArgument, "format tag must be a single non-empty token");
  }
}

void SectionedFile::add(std::string name, Eigen::MatrixXd values) {
  if (name.empty() || std::any_of(name.begin(), name.end(), is_space)) {
    fail(Errc::kInvalidArgument, "section name must be a single non-empty token");
  }
  if (contains(name)) fail(Errc::kInvalidArgument, "duplicate section " + name);
  sections_.push_back(Section{std::move(name), std::move(values)});
}

bool SectionedFile::contains(std::string_view name) const {
  return std::any_of(sections_.begin(), sections_.end(),
                     [&](const Section& s) { return s.name == name; });
}

const Eigen::MatrixXd& SectionedFile::get(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return s.values;
  }
  fail(Errc::kParse, format_ + " file is missing section " + std::string(name));
}

const Eigen::MatrixXd& SectionedFile::get(std::string_view name, Eigen::Index rows,
                                          Eigen::Index cols) const {
  const auto& m = get(name);
  if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols)) {
    std::ostringstream os;
    os << "section " << name << " has shape " << m.rows() << "x" << m.cols() << ", expected "
       << (rows >= 0 ? std::to_string(rows) : "*") << "x"
       << (cols >= 0 ? std::to_string(cols) : "*");
    fail(Errc::kParse, os.str());
  }
  return m;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

double parse_number(std::string_view token, std::string_view context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && token.front() == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    fail(Errc::kParse, "malformed number '" + std::string(token) + "'" + std::string(context));
  }
  return value;
}

long long parse_integer(std::string_view token, std::string_view context) {
  long long value = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    fail(Errc::kParse, "malformed integer '" + std::string(token) + "'" + std::string(context));
  }
  return value;
}

SectionedFile parse_sectioned(std::string_view text, std::string_view expected_format) {
  const auto lines = split_lines(text);

  std::size_t line_idx = 0;
  while (line_idx < lines.size() && split_whitespace(lines[line_idx]).empty()) ++line_idx;
  if (line_idx == lines.size()) fail(Errc::kParse, "empty input, expected HANDKIT header");
  const auto header = split_whitespace(lines[line_idx]);
  if (header.size() != 3 || header[0] != kMagic || header[2] != kVersion) {
    fail(Errc::kParse, "expected 'HANDKIT <format> v1' header" + at_line(line_idx + 1));
  }
  if (!expected_format.empty() && header[1] != expected_format) {
    fail(Errc::kParse, "expected format '" + std::string(expected_format) + "', found '" +
                           std::string(header[1]) + "'" + at_line(line_idx + 1));
  }
  SectionedFile file{std::string(header[1])};

  struct Token {
    std::string_view text;
    std::size_t line;
  };
  std::vector<Token> tokens;
  for (std::size_t i = line_idx + 1; i < lines.size(); ++i) {
    for (auto tok : split_whitespace(lines[i])) tokens.push_back({tok, i + 1});
  }

  std::size_t pos = 0;
  while (pos < tokens.size()) {
    const auto& kw = tokens[pos];
    if (kw.text != "SECTION") {
      fail(Errc::kParse, "expected SECTION, found '" + std::string(kw.text) + "'" + at_line(kw.line));
    }
    if (tokens.size() - pos < 4) {
      fail(Errc::kParse, "truncated section header" + at_line(kw.line));
    }
    const auto& name = tokens[pos + 1];
    const auto rows = parse_integer(tokens[pos + 2].text, at_line(tokens[pos + 2].line));
    const auto cols = parse_integer(tokens[pos + 3].text, at_line(tokens[pos + 3].line));
    if (name.line != kw.line || tokens[pos + 2].line != kw.line || tokens[pos + 3].line != kw.line) {
      fail(Errc::kParse, "section header must fit on one line" + at_line(kw.line));
    }
    if (rows < 0 || cols < 0) fail(Errc::kParse, "negative section dimensions" + at_line(kw.line));
    pos += 4;
    const auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (tokens.size() - pos < count) {
      const std::size_t last_line = tokens.empty() ? kw.line : tokens.back().line;
      fail(Errc::kParse, "section " + std::string(name.text) + " expects " + std::to_string(count) +
                             " values but input ends after " + std::to_string(tokens.size() - pos) +
                             at_line(last_line));
    }
    Eigen::MatrixXd values(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const auto& tok = tokens[pos++];
        if (tok.text == "SECTION") {
          fail(Errc::kParse, "section " + std::string(name.text) + " is short of values" +
                                 at_line(tok.line));
        }
        values(r, c) = parse_number(tok.text, at_line(tok.line));
      }
    }
    if (file.contains(name.text)) {
      fail(Errc::kParse, "duplicate section " + std::string(name.text) + at_line(kw.line));
    }
    file.add(std::string(name.text), std::move(values));
  }
  return file;
}

std::string to_text(const SectionedFile& file) {
  std::string out;
  out.append(kMagic).append(" ").append(file.format()).append(" ").append(kVersion).append("\n");
  for (const auto& s : file.sections()) {
    out.append("SECTION ").append(s.name).append(" ");
    out.append(std::to_string(s.values.rows())).append(" ");
    out.append(std::to_string(s.values.cols())).append("\n");
    for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.values.cols(); ++c) {
        if (c > 0) out.push_back(' ');
        out.append(format_number(s.values(r, c)));
      }
      out.push_back('\n');
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::kIo, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(Errc::kIo, "write failed for " + path.string());
}

SectionedFile read_sectioned(const std::filesystem::path& path, std::string_view expected_format) {
  const std::string text = read_text_file(path);
  try {
    return parse_sectioned(text, expected_format);
  } catch (const Error& e) {
    if (e.code() == Errc::kParse) fail(Errc::kParse, path.string() + ": " + e.message());
    throw;
  }
}

void write_sectioned(const SectionedFile& file, const std::filesystem::path& path) {
  write_text_file(path, to_text(file));
}

}  // namespace handkit
