#include "handkit/formats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handkit/error.hpp"

namespace handkit {
namespace {

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

struct Line {
  std::vector<std::string_view> tokens;
  std::size_t number;
};

/// Content lines after the `HANDKIT <format> v1` header.
std::vector<Line> content_lines(std::string_view text, std::string_view format) {
  const auto lines = split_lines(text);
  std::vector<Line> out;
  bool header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tokens = split_whitespace(lines[i]);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (!header) {
      if (tokens.size() != 3 || tokens[0] != "HANDKIT" || tokens[1] != format || tokens[2] != "v1") {
        fail(Errc::kParse, "expected 'HANDKIT " + std::string(format) + " v1' header" + at_line(i + 1));
      }
      header = true;
      continue;
    }
    out.push_back({std::move(tokens), i + 1});
  }
  if (!header) fail(Errc::kParse, "empty input, expected 'HANDKIT " + std::string(format) + " v1' header");
  return out;
}

std::string header(std::string_view format) { return "HANDKIT " + std::string(format) + " v1\n"; }

double number(const Line& line, std::size_t k) { return parse_number(line.tokens[k], at_line(line.number)); }

Eigen::MatrixXd checked(const SectionedFile& file, std::string_view name, Eigen::Index rows, Eigen::Index cols) {
  const auto& m = file.get(name, rows, cols);
  if (!m.allFinite()) fail(Errc::kParse, "section " + std::string(name) + " holds non-finite values");
  return m;
}

int integer_value(double v, std::string_view what, double lo, double hi) {
  if (v != std::floor(v) || v < lo || v > hi) {
    fail(Errc::kParse, std::string(what) + " must be an integer in [" + format_number(lo) + ", " + format_number(hi) + "]");
  }
  return static_cast<int>(v);
}

template <typename F>
auto as_parse_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::kParse) throw;
    fail(Errc::kParse, e.what());
  }
}

}  // namespace

std::vector<LandmarkRecord> parse_landmarks(std::string_view text) {
  const auto lines = content_lines(text, "landmarks");
  std::vector<LandmarkRecord> out;
  std::size_t i = 0;
  while (i < lines.size()) {
    const Line& head = lines[i++];
    if (head.tokens.size() != 2 || head.tokens[0] != "IMAGE") {
      fail(Errc::kParse, "expected 'IMAGE <id>'" + at_line(head.number));
    }
    LandmarkRecord rec{std::string(head.tokens[1]), {}};
    if (std::any_of(out.begin(), out.end(), [&](const LandmarkRecord& r) { return r.image_id == rec.image_id; })) {
      fail(Errc::kParse, "duplicate image id " + rec.image_id + at_line(head.number));
    }
    if (i < lines.size() && lines[i].tokens[0] == "INTRINSICS") {
      const Line& l = lines[i++];
      if (l.tokens.size() != 5) fail(Errc::kParse, "INTRINSICS needs fx fy cx cy" + at_line(l.number));
      IntrinsicCamera k{number(l, 1), number(l, 2), number(l, 3), number(l, 4)};
      as_parse_error([&] { k.validate(); return 0; });
      rec.landmarks.intrinsics = k;
    }
    for (int r = 0; r < kKeypointCount; ++r) {
      if (i >= lines.size()) {
        fail(Errc::kParse, "image " + rec.image_id + " has " + std::to_string(r) + " landmark rows, expected 21" +
                               at_line(lines.back().number));
      }
      const Line& l = lines[i++];
      if (l.tokens.size() != 3) {
        fail(Errc::kParse, "image " + rec.image_id + " has " + std::to_string(r) +
                               " landmark rows, expected 21 rows of 'u v visibility'" + at_line(l.number));
      }
      rec.landmarks.points(r, 0) = number(l, 0);
      rec.landmarks.points(r, 1) = number(l, 1);
      const auto vis = parse_integer(l.tokens[2], at_line(l.number));
      if (vis != 0 && vis != 1) fail(Errc::kParse, "visibility must be 0 or 1" + at_line(l.number));
      if (!std::isfinite(rec.landmarks.points(r, 0)) || !std::isfinite(rec.landmarks.points(r, 1))) {
        fail(Errc::kParse, "landmark is not finite" + at_line(l.number));
      }
      rec.landmarks.visibility[r] = static_cast<int>(vis);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_landmarks(const std::vector<LandmarkRecord>& records) {
  std::string out = header("landmarks");
  for (const auto& rec : records) {
    out += "IMAGE " + rec.image_id + "\n";
    if (const auto& k = rec.landmarks.intrinsics) {
      out += "INTRINSICS " + format_number(k->fx) + " " + format_number(k->fy) + " " + format_number(k->cx) + " " +
             format_number(k->cy) + "\n";
    }
    for (int r = 0; r < kKeypointCount; ++r) {
      out += format_number(rec.landmarks.points(r, 0)) + " " + format_number(rec.landmarks.points(r, 1)) + " " +
             std::to_string(rec.landmarks.visibility[r]) + "\n";
    }
  }
  return out;
}

std::vector<std::string> DetectionSet::image_ids() const {
  std::vector<std::string> ids;
  const auto note = [&](const std::string& id) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  };
  for (const auto& im : images) note(im.id);
  for (const auto& r : records) note(r.image_id);
  return ids;
}

DetectionSet parse_detections(std::string_view text) {
  DetectionSet set;
  const auto lines = split_lines(text);
  if (std::all_of(lines.begin(), lines.end(), [](std::string_view l) { return split_whitespace(l).empty(); })) {
    return set;
  }
  for (const Line& l : content_lines(text, "detections")) {
    if (l.tokens[0] == "IMAGE") {
      if (l.tokens.size() != 4) fail(Errc::kParse, "expected 'IMAGE <id> <width> <height>'" + at_line(l.number));
      ImageInfo info{std::string(l.tokens[1]), number(l, 2), number(l, 3)};
      if (!(info.width > 0.0) || !(info.height > 0.0) || !std::isfinite(info.width) || !std::isfinite(info.height)) {
        fail(Errc::kParse, "image dimensions must be positive" + at_line(l.number));
      }
      const auto it = std::find_if(set.images.begin(), set.images.end(),
                                   [&](const ImageInfo& im) { return im.id == info.id; });
      if (it == set.images.end()) {
        set.images.push_back(info);
      } else if (!(*it == info)) {
        fail(Errc::kParse, "conflicting dimensions for image " + info.id + at_line(l.number));
      }
      continue;
    }
    if (l.tokens.size() != 8 && l.tokens.size() != 8 + 2 * kKeypointCount) {
      fail(Errc::kParse, "detection lines need 8 or 50 fields, found " + std::to_string(l.tokens.size()) +
                             at_line(l.number));
    }
    DetectionRecord rec{std::string(l.tokens[0]), {}};
    Detection& d = rec.detection;
    if (l.tokens[1] != "-") {
      const auto src = parse_integer(l.tokens[1], at_line(l.number));
      if (src < 0 || src > 1'000'000) fail(Errc::kParse, "source id out of range" + at_line(l.number));
      d.source_id = static_cast<int>(src);
    }
    try {
      d.side = parse_side(l.tokens[2]);
    } catch (const Error& e) {
      fail(Errc::kParse, e.what() + at_line(l.number));
    }
    d.score = number(l, 3);
    d.box = BBox{number(l, 4), number(l, 5), number(l, 6), number(l, 7)};
    if (l.tokens.size() > 8) {
      Points2 kp(kKeypointCount, 2);
      for (int k = 0; k < kKeypointCount; ++k) {
        kp(k, 0) = number(l, 8 + 2 * static_cast<std::size_t>(k));
        kp(k, 1) = number(l, 9 + 2 * static_cast<std::size_t>(k));
      }
      if (!kp.allFinite()) fail(Errc::kParse, "keypoints are not finite" + at_line(l.number));
      d.keypoints = std::move(kp);
    }
    try {
      d.validate();
    } catch (const Error& e) {
      fail(Errc::kParse, e.what() + at_line(l.number));
    }
    set.records.push_back(std::move(rec));
  }
  return set;
}

std::string format_detections(const DetectionSet& set) {
  std::string out = header("detections");
  for (const auto& im : set.images) {
    out += "IMAGE " + im.id + " " + format_number(im.width) + " " + format_number(im.height) + "\n";
  }
  for (const auto& r : set.records) {
    const Detection& d = r.detection;
    out += r.image_id + " " + (d.source_id ? std::to_string(*d.source_id) : std::string("-")) + " " +
           side_name(d.side) + " " + format_number(d.score) + " " + format_number(d.box.x1) + " " +
           format_number(d.box.y1) + " " + format_number(d.box.x2) + " " + format_number(d.box.y2);
    if (d.keypoints) {
      for (int k = 0; k < kKeypointCount; ++k) {
        out += " " + format_number((*d.keypoints)(k, 0)) + " " + format_number((*d.keypoints)(k, 1));
      }
    }
    out += "\n";
  }
  return out;
}

SectionedFile grids_to_sectioned(const std::vector<GridPrediction>& levels) {
  SectionedFile file("grid");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto& g = levels[k];
    g.validate();
    const std::string p = "LEVEL_" + std::to_string(k) + "_";
    Eigen::MatrixXd meta(1, 4);
    meta << g.grid_h, g.grid_w, g.stride, g.bins;
    file.add(p + "META", meta);
    file.add(p + "SCORES", g.scores);
    file.add(p + "DFL", g.dfl);
    if (g.keypoints) file.add(p + "KPTS", *g.keypoints);
  }
  return file;
}

std::vector<GridPrediction> grids_from_sectioned(const SectionedFile& file) {
  std::vector<GridPrediction> levels;
  for (int k = 0; file.contains("LEVEL_" + std::to_string(k) + "_META"); ++k) {
    const std::string p = "LEVEL_" + std::to_string(k) + "_";
    const auto meta = checked(file, p + "META", 1, 4);
    GridPrediction g;
    g.grid_h = integer_value(meta(0, 0), "grid height", 1, 1 << 14);
    g.grid_w = integer_value(meta(0, 1), "grid width", 1, 1 << 14);
    g.stride = meta(0, 2);
    g.bins = integer_value(meta(0, 3), "DFL bin count", 1, 1024);
    g.scores = checked(file, p + "SCORES", g.cells(), 2);
    g.dfl = checked(file, p + "DFL", g.cells(), 4 * (g.bins + 1));
    if (file.contains(p + "KPTS")) g.keypoints = checked(file, p + "KPTS", g.cells(), 2 * kKeypointCount);
    as_parse_error([&] { g.validate(); return 0; });
    levels.push_back(std::move(g));
  }
  if (levels.size() != static_cast<std::size_t>(
                           std::count_if(file.sections().begin(), file.sections().end(), [](const Section& s) {
                             return s.name.size() > 5 && s.name.ends_with("_META");
                           }))) {
    fail(Errc::kParse, "grid levels must be numbered from 0 without gaps");
  }
  return levels;
}

SectionedFile sequence_to_sectioned(const PoseSequence& seq) {
  seq.validate();
  const Eigen::Index v = seq.has_vertices() ? seq.frames.front().vertices->rows() : 0;
  const auto t = static_cast<Eigen::Index>(seq.frames.size());
  SectionedFile file("sequence");
  Eigen::MatrixXd meta(1, 3);
  meta << seq.frame_rate, kKeypointCount, static_cast<double>(v);
  file.add("META", meta);
  Eigen::MatrixXd joints(t, 3 * kKeypointCount);
  for (Eigen::Index f = 0; f < t; ++f) {
    joints.row(f) = flatten_points(seq.frames[static_cast<std::size_t>(f)].joints).transpose();
  }
  file.add("JOINTS", joints);
  if (v > 0) {
    Eigen::MatrixXd verts(t, 3 * v);
    for (Eigen::Index f = 0; f < t; ++f) {
      verts.row(f) = flatten_points(*seq.frames[static_cast<std::size_t>(f)].vertices).transpose();
    }
    file.add("VERTICES", verts);
  }
  return file;
}

PoseSequence sequence_from_sectioned(const SectionedFile& file) {
  const auto meta = checked(file, "META", 1, 3);
  PoseSequence seq;
  seq.frame_rate = meta(0, 0);
  integer_value(meta(0, 1), "joint count", kKeypointCount, kKeypointCount);
  const int v = integer_value(meta(0, 2), "vertex count", 0, 1 << 24);
  const auto joints = checked(file, "JOINTS", -1, 3 * kKeypointCount);
  Eigen::MatrixXd verts;
  if (v > 0) verts = checked(file, "VERTICES", joints.rows(), 3 * static_cast<Eigen::Index>(v));
  for (Eigen::Index f = 0; f < joints.rows(); ++f) {
    PoseFrame frame;
    frame.joints = unflatten_points(joints.row(f).transpose());
    if (v > 0) frame.vertices = unflatten_points(verts.row(f).transpose());
    seq.frames.push_back(std::move(frame));
  }
  as_parse_error([&] { seq.validate(); return 0; });
  return seq;
}

SectionedFile poses_to_sectioned(const std::vector<NamedPose>& poses) {
  SectionedFile file("poses");
  for (const auto& p : poses) {
    file.add(p.id + ".joints", p.joints);
    if (p.vertices) file.add(p.id + ".vertices", *p.vertices);
  }
  return file;
}

std::vector<NamedPose> poses_from_sectioned(const SectionedFile& file) {
  std::vector<NamedPose> out;
  for (const auto& s : file.sections()) {
    const auto dot = s.name.rfind('.');
    if (dot == std::string::npos || dot == 0) fail(Errc::kParse, "pose section " + s.name + " lacks an '<id>.' prefix");
    const std::string id = s.name.substr(0, dot);
    const std::string kind = s.name.substr(dot + 1);
    if (kind == "joints") {
      out.push_back({id, checked(file, s.name, kKeypointCount, 3), std::nullopt});
    } else if (kind == "vertices") {
      if (out.empty() || out.back().id != id || out.back().vertices) {
        fail(Errc::kParse, "section " + s.name + " must follow " + id + ".joints");
      }
      out.back().vertices = checked(file, s.name, -1, 3);
    } else {
      fail(Errc::kParse, "unknown pose section " + s.name);
    }
  }
  return out;
}

SectionedFile corpus_to_sectioned(const Eigen::MatrixXd& meshes) {
  SectionedFile file("corpus");
  file.add("MESHES", meshes);
  return file;
}

Eigen::MatrixXd corpus_from_sectioned(const SectionedFile& file) {
  auto meshes = checked(file, "MESHES", -1, -1);
  if (meshes.cols() % 3 != 0 || meshes.cols() == 0) fail(Errc::kParse, "corpus rows must hold 3V coordinates");
  return meshes;
}

SectionedFile params_to_sectioned(const HandParams& params) {
  SectionedFile file("params");
  const auto& pose = params.pose;
  const int stride = pose_stride(pose.encoding());
  Eigen::MatrixXd rows(kJointCount, stride);
  for (int j = 0; j < kJointCount; ++j) rows.row(j) = pose.values().segment(stride * j, stride).transpose();
  file.add(pose.encoding() == PoseEncoding::kAxisAngle ? "POSE_AA" : "POSE_6D", rows);
  file.add("SHAPE", params.shape.beta.transpose());
  if (const auto* weak = std::get_if<WeakPerspectiveCamera>(&params.camera)) {
    Eigen::MatrixXd cam(1, 3);
    cam << weak->scale, weak->translation.x(), weak->translation.y();
    file.add("CAMERA_WEAK", cam);
  } else {
    const auto& p = std::get<PerspectiveCameraPose>(params.camera);
    Eigen::MatrixXd cam(1, 7);
    cam << p.intrinsics.fx, p.intrinsics.fy, p.intrinsics.cx, p.intrinsics.cy, p.translation.x(), p.translation.y(),
        p.translation.z();
    file.add("CAMERA_PERSPECTIVE", cam);
  }
  return file;
}

HandParams params_from_sectioned(const SectionedFile& file) {
  HandParams params;
  const bool aa = file.contains("POSE_AA");
  if (aa == file.contains("POSE_6D")) fail(Errc::kParse, "params need exactly one of POSE_AA and POSE_6D");
  const PoseEncoding enc = aa ? PoseEncoding::kAxisAngle : PoseEncoding::kRot6d;
  const int stride = pose_stride(enc);
  const auto rows = checked(file, aa ? "POSE_AA" : "POSE_6D", kJointCount, stride);
  Eigen::VectorXd values(pose_size(enc));
  for (int j = 0; j < kJointCount; ++j) values.segment(stride * j, stride) = rows.row(j).transpose();
  params.pose = PoseParams(enc, values);
  params.shape.beta = checked(file, "SHAPE", 1, kShapeCount).transpose();

  const bool weak = file.contains("CAMERA_WEAK");
  if (weak == file.contains("CAMERA_PERSPECTIVE")) {
    fail(Errc::kParse, "params need exactly one of CAMERA_WEAK and CAMERA_PERSPECTIVE");
  }
  if (weak) {
    const auto c = checked(file, "CAMERA_WEAK", 1, 3);
    WeakPerspectiveCamera cam{c(0, 0), Vec2(c(0, 1), c(0, 2))};
    as_parse_error([&] { cam.validate(); return 0; });
    params.camera = cam;
  } else {
    const auto c = checked(file, "CAMERA_PERSPECTIVE", 1, 7);
    PerspectiveCameraPose cam{IntrinsicCamera{c(0, 0), c(0, 1), c(0, 2), c(0, 3)}, Vec3(c(0, 4), c(0, 5), c(0, 6))};
    as_parse_error([&] { cam.intrinsics.validate(); return 0; });
    params.camera = cam;
  }
  return params;
}

SectionedFile features_to_sectioned(const Eigen::VectorXd& feature) {
  SectionedFile file("features");
  file.add("FEATURE", feature.transpose());
  return file;
}

Eigen::VectorXd features_from_sectioned(const SectionedFile& file) {
  return checked(file, "FEATURE", 1, -1).transpose();
}

std::string format_trace(const FitResult& result) {
  std::string out = header("trace") + "iteration,objective\n";
  for (std::size_t i = 0; i < result.objective_trace.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_number(result.objective_trace[i]) + "\n";
  }
  return out;
}

std::string format_report(const EvalReport& report) { return header("report") + report.to_text(); }

}  // namespace handkit
