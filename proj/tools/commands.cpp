#include "commands.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "handkit/detection.hpp"
#include "handkit/error.hpp"
#include "handkit/fitting.hpp"
#include "handkit/formats.hpp"
#include "handkit/hand_model.hpp"
#include "handkit/losses.hpp"
#include "handkit/metrics.hpp"
#include "handkit/pca_prior.hpp"
#include "handkit/refine_sampler.hpp"
#include "handkit/sectioned_file.hpp"

namespace handkit::cli {
namespace {

void require_input(const fs::path& p, const char* flag) {
  if (p.empty()) fail(Errc::kInvalidConfig, std::string(flag) + " is required");
  if (!fs::is_regular_file(p)) fail(Errc::kIo, std::string(flag) + ": no such file " + p.string());
}

void require_output(const fs::path& p, const char* flag) {
  if (p.empty()) fail(Errc::kInvalidConfig, std::string(flag) + " is required");
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    fail(Errc::kIo, std::string(flag) + ": directory " + parent.string() + " does not exist");
  }
}

void require_unit_interval(double v, const char* flag) {
  if (!(v >= 0.0 && v <= 1.0)) fail(Errc::kInvalidConfig, std::string(flag) + " must lie in [0, 1]");
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    out.push_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<unsigned> parse_stages(std::string_view text) {
  std::vector<unsigned> stages;
  for (auto stage : split(text, ',')) {
    unsigned blocks = 0;
    for (auto name : split(stage, '+')) {
      if (name == "camera") {
        blocks |= kBlockCamera;
      } else if (name == "global") {
        blocks |= kBlockGlobalOrientation;
      } else if (name == "fingers") {
        blocks |= kBlockFingerPose;
      } else if (name == "shape") {
        blocks |= kBlockShape;
      } else if (name == "all") {
        blocks |= kBlockAll;
      } else {
        fail(Errc::kInvalidConfig, "unknown stage block '" + std::string(name) +
                                       "' (camera, global, fingers, shape, all)");
      }
    }
    stages.push_back(blocks);
  }
  return stages;
}

bool safe_file_stem(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

std::string joined(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
  return out;
}

std::string threshold_label(double t) { return format_number(t); }

std::string curve_csv(std::string_view header_line, const std::vector<CurvePoint>& curve) {
  std::string out = "HANDKIT curve v1\n";
  out.append(header_line).append("\n");
  for (const auto& p : curve) out += format_number(p.x) + "," + format_number(p.y) + "\n";
  return out;
}

}  // namespace

int run_fit(const FitOptions& o) {
  require_input(o.landmarks, "--landmarks");
  require_input(o.model, "--model");
  if (!o.prior.empty()) require_input(o.prior, "--prior");
  if (!o.ranges.empty()) require_input(o.ranges, "--ranges");
  if (o.out_dir.empty()) fail(Errc::kInvalidConfig, "--out-dir is required");

  FitConfig config;
  config.weights = FitWeights{o.w_proj, o.w_bmc, o.w_prior};
  config.max_iters = o.max_iters;
  config.step_size = o.step_size;
  config.convergence_tol = o.tol;
  config.stage_schedule = parse_stages(o.stages);
  config.seed = o.seed;
  config.init_jitter = o.init_jitter;
  if (o.camera == "weak") {
    config.camera_kind = CameraKind::kWeakPerspective;
  } else if (o.camera == "perspective") {
    config.camera_kind = CameraKind::kPerspective;
  } else {
    fail(Errc::kInvalidConfig, "--camera must be 'weak' or 'perspective'");
  }
  config.validate();

  auto records = parse_landmarks(read_text_file(o.landmarks));
  if (!o.image.empty()) {
    std::erase_if(records, [&](const LandmarkRecord& r) { return r.image_id != o.image; });
    if (records.empty()) fail(Errc::kInvalidArgument, "image " + o.image + " is not in " + o.landmarks.string());
  }
  for (const auto& r : records) {
    if (!safe_file_stem(r.image_id)) {
      fail(Errc::kInvalidArgument, "image id '" + r.image_id + "' cannot name an output file");
    }
  }
  const HandModelAssets assets = load_model(o.model);
  std::optional<PcaPrior> prior;
  if (!o.prior.empty()) prior = load_prior(o.prior);
  const BmcRanges ranges = o.ranges.empty() ? default_ranges(assets) : load_ranges(o.ranges);

  fs::create_directories(o.out_dir);
  EvalReport report;
  bool all_converged = true;
  for (const auto& rec : records) {
    const FitResult r = fit_hand(rec.landmarks, assets, prior ? &*prior : nullptr, ranges, config);
    write_sectioned(params_to_sectioned(HandParams{r.pose, r.shape, r.camera}), o.out_dir / (rec.image_id + ".params"));
    write_text_file(o.out_dir / (rec.image_id + ".trace.csv"), format_trace(r));
    const double final_objective = r.objective_trace.empty() ? r.initial_objective : r.objective_trace.back();
    report.add(rec.image_id + ".initial_objective", r.initial_objective, "objective");
    report.add(rec.image_id + ".final_objective", final_objective, "objective");
    report.add(rec.image_id + ".reprojection_error", r.reprojection_error, "px");
    report.add(rec.image_id + ".iterations", r.iterations_used, "count");
    report.add(rec.image_id + ".converged", r.converged ? 1.0 : 0.0, "flag");
    all_converged = all_converged && r.converged;
  }
  write_text_file(o.out_dir / "fit_report.txt", format_report(report));
  return all_converged ? kExitOk : kExitNotConverged;
}

int run_fuse(const FuseOptions& o) {
  if (o.inputs.empty()) fail(Errc::kInvalidConfig, "at least one --input is required");
  for (const auto& p : o.inputs) require_input(p, "--input");
  require_output(o.output, "--output");
  require_unit_interval(o.iou, "--iou");

  std::vector<DetectionSet> sets;
  for (const auto& p : o.inputs) {
    try {
      sets.push_back(parse_detections(read_text_file(p)));
    } catch (const Error& e) {
      fail(e.code(), p.string() + ": " + e.message());
    }
  }

  std::map<std::string, ImageInfo> images;
  std::set<std::string> ids;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& im : sets[s].images) {
      const auto [it, inserted] = images.emplace(im.id, im);
      if (!inserted && !(it->second == im)) {
        fail(Errc::kInvalidArgument, "conflicting IMAGE headers for " + im.id + " in " + o.inputs[s].string());
      }
    }
    for (const auto& id : sets[s].image_ids()) ids.insert(id);
  }

  DetectionSet out;
  for (const auto& [id, info] : images) out.images.push_back(info);
  for (const auto& id : ids) {
    std::vector<std::vector<Detection>> per_detector(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
      for (const auto& r : sets[s].records) {
        if (r.image_id == id) per_detector[s].push_back(r.detection);
      }
    }
    auto fused = associate_and_fuse(per_detector, o.iou);
    std::stable_sort(fused.begin(), fused.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    for (auto& d : fused) out.records.push_back({id, std::move(d)});
  }
  write_text_file(o.output, format_detections(out));
  return kExitOk;
}

int run_eval_pose(const EvalPoseOptions& o) {
  require_input(o.pred, "--pred");
  require_input(o.gt, "--gt");
  require_output(o.output, "--output");
  if (!o.curve.empty()) require_output(o.curve, "--curve");
  if (o.f_thresholds.empty()) fail(Errc::kInvalidConfig, "--f-threshold needs at least one value");

  const auto pred = poses_from_sectioned(read_sectioned(o.pred, "poses"));
  const auto gt = poses_from_sectioned(read_sectioned(o.gt, "poses"));
  std::map<std::string, const NamedPose*> gt_by_id;
  for (const auto& g : gt) gt_by_id[g.id] = &g;
  std::vector<std::string> unmatched;
  std::set<std::string> pred_ids;
  for (const auto& p : pred) {
    pred_ids.insert(p.id);
    if (!gt_by_id.contains(p.id)) unmatched.push_back(p.id);
  }
  for (const auto& g : gt) {
    if (!pred_ids.contains(g.id)) unmatched.push_back(g.id);
  }
  if (!unmatched.empty()) fail(Errc::kInvalidArgument, "unmatched ids: " + joined(unmatched));
  if (pred.empty()) fail(Errc::kEmptyInput, "no poses to evaluate");

  const bool with_vertices = std::all_of(pred.begin(), pred.end(), [&](const NamedPose& p) {
    return p.vertices.has_value() && gt_by_id.at(p.id)->vertices.has_value();
  });

  double pa_j = 0.0;
  double pa_v = 0.0;
  double raw_j = 0.0;
  std::vector<double> f(o.f_thresholds.size(), 0.0);
  std::vector<double> joint_errors;
  std::vector<double> vertex_errors;
  for (const auto& p : pred) {
    const NamedPose& g = *gt_by_id.at(p.id);
    const Points3 pj = p.joints;
    const Points3 gj = g.joints;
    const Points3 aj = procrustes_align(pj, gj);
    pa_j += mpjpe(aj, gj);
    raw_j += mpjpe(pj, gj);
    for (Eigen::Index r = 0; r < aj.rows(); ++r) joint_errors.push_back((aj.row(r) - gj.row(r)).norm() * 1000.0);

    const Points3& fp = with_vertices ? *p.vertices : pj;
    const Points3& fg = with_vertices ? *g.vertices : gj;
    if (with_vertices) {
      if (p.vertices->rows() != g.vertices->rows()) {
        fail(Errc::kInvalidArgument, "vertex counts differ for " + p.id);
      }
      const Points3 av = procrustes_align(fp, fg);
      pa_v += mpjpe(av, fg);
      for (Eigen::Index r = 0; r < av.rows(); ++r) vertex_errors.push_back((av.row(r) - fg.row(r)).norm() * 1000.0);
    }
    for (std::size_t k = 0; k < f.size(); ++k) f[k] += f_score(fp, fg, o.f_thresholds[k], true);
  }
  const auto n = static_cast<double>(pred.size());

  EvalReport report;
  report.add("pa_mpjpe", pa_j / n, "mm");
  if (with_vertices) report.add("pa_mpvpe", pa_v / n, "mm");
  report.add("mpjpe", raw_j / n, "mm");
  for (std::size_t k = 0; k < f.size(); ++k) report.add("f@" + threshold_label(o.f_thresholds[k]), f[k] / n, "fraction");
  report.add("auc_joints", auc(joint_errors, o.auc_min, o.auc_max, o.auc_steps), "fraction");
  if (with_vertices) report.add("auc_vertices", auc(vertex_errors, o.auc_min, o.auc_max, o.auc_steps), "fraction");
  write_text_file(o.output, format_report(report));
  if (!o.curve.empty()) {
    write_text_file(o.curve, curve_csv("threshold_mm,pck_joints", pck_curve(joint_errors, o.auc_min, o.auc_max, o.auc_steps)));
  }
  return kExitOk;
}

int run_eval_det(const EvalDetOptions& o) {
  require_input(o.pred, "--pred");
  require_input(o.gt, "--gt");
  require_output(o.output, "--output");
  if (!o.curve.empty()) require_output(o.curve, "--curve");
  require_unit_interval(o.iou, "--iou");

  const DetectionSet pred = parse_detections(read_text_file(o.pred));
  const DetectionSet gt = parse_detections(read_text_file(o.gt));
  const auto ids = gt.image_ids();
  std::vector<std::string> unmatched;
  for (const auto& id : pred.image_ids()) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) unmatched.push_back(id);
  }
  if (!unmatched.empty()) fail(Errc::kInvalidArgument, "unmatched ids: " + joined(unmatched));

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  ImageDetections dets(ids.size());
  ImageGroundTruth gts(ids.size());
  for (const auto& r : pred.records) dets[index.at(r.image_id)].push_back(r.detection);
  for (const auto& r : gt.records) gts[index.at(r.image_id)].push_back({r.detection.box, r.detection.side});

  EvalReport report;
  report.add("ap@" + threshold_label(o.iou), average_precision(dets, gts, o.iou), "fraction");
  report.add("map@0.5:0.95", mean_ap(dets, gts), "fraction");
  write_text_file(o.output, format_report(report));
  if (!o.curve.empty()) write_text_file(o.curve, curve_csv("recall,precision", precision_recall_curve(dets, gts, o.iou)));
  return kExitOk;
}

int run_eval_temporal(const EvalTemporalOptions& o) {
  require_input(o.pred, "--pred");
  if (!o.gt.empty()) require_input(o.gt, "--gt");
  require_output(o.output, "--output");

  const PoseSequence pred = sequence_from_sectioned(read_sectioned(o.pred, "sequence"));
  EvalReport report;
  report.add("mpfje", mpfje(pred), "mm/frame");
  if (pred.has_vertices()) report.add("mpfve", mpfve(pred), "mm/frame");
  if (pred.frames.size() >= 4) report.add("jitter", jitter(pred) / 1000.0, "km/s^3");
  if (!o.gt.empty()) {
    const PoseSequence gt = sequence_from_sectioned(read_sectioned(o.gt, "sequence"));
    if (gt.frame_rate != pred.frame_rate) fail(Errc::kInvalidArgument, "frame rates differ between --pred and --gt");
    report.add("rte", rte(pred, gt), "mm");
  }
  write_text_file(o.output, format_report(report));
  return kExitOk;
}

int run_decode(const DecodeOptions& o) {
  require_input(o.grid, "--grid");
  require_output(o.output, "--output");
  require_unit_interval(o.score_thresh, "--score-thresh");
  require_unit_interval(o.nms_thresh, "--nms-thresh");
  if (o.image.empty() || split_whitespace(o.image).size() != 1 || o.image == "IMAGE") {
    fail(Errc::kInvalidConfig, "--image must be a single token other than IMAGE");
  }

  const auto levels = grids_from_sectioned(read_sectioned(o.grid, "grid"));
  std::vector<Detection> merged;
  for (const auto& level : levels) {
    auto kept = nms(decode_grid(level, o.score_thresh), o.nms_thresh);
    merged.insert(merged.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  }
  DetectionSet out;
  for (auto& d : nms(std::move(merged), o.nms_thresh)) out.records.push_back({o.image, std::move(d)});
  write_text_file(o.output, format_detections(out));
  return kExitOk;
}

int run_pca_train(const PcaTrainOptions& o) {
  require_input(o.corpus, "--corpus");
  require_output(o.output, "--output");
  if (o.components < 1) fail(Errc::kInvalidConfig, "--components must be at least 1");
  const Eigen::MatrixXd meshes = corpus_from_sectioned(read_sectioned(o.corpus, "corpus"));
  save_prior(pca_fit(meshes, o.components), o.output);
  return kExitOk;
}

int run_synth_model(const SynthModelOptions& o) {
  require_output(o.output, "--output");
  if (!o.ranges_output.empty()) require_output(o.ranges_output, "--ranges-output");
  const HandModelAssets assets = synth_model(o.seed, o.vertices);
  save_model(assets, o.output);
  if (!o.ranges_output.empty()) save_ranges(default_ranges(assets), o.ranges_output);
  return kExitOk;
}

int run_sample_features(const SampleFeaturesOptions& o) {
  require_input(o.model, "--model");
  require_input(o.params, "--params");
  require_input(o.features, "--features");
  require_output(o.output, "--output");
  if (!o.regressor.empty()) {
    require_input(o.regressor, "--regressor");
    require_output(o.refined_output, "--refined-output");
  }
  if (o.extra_levels < 0) fail(Errc::kInvalidConfig, "--extra-levels must be non-negative");
  const AggregateKind kind = parse_aggregate(o.aggregate);
  BorderMode border = BorderMode::kClamp;
  if (o.border == "zeros") {
    border = BorderMode::kZeros;
  } else if (o.border != "clamp") {
    fail(Errc::kInvalidConfig, "--border must be 'clamp' or 'zeros'");
  }

  const HandModelAssets assets = load_model(o.model);
  const HandParams params = params_from_sectioned(read_sectioned(o.params, "params"));
  const auto* cam = std::get_if<WeakPerspectiveCamera>(&params.camera);
  if (cam == nullptr) fail(Errc::kInvalidArgument, "feature sampling needs a weak-perspective camera");
  const FeaturePyramid pyramid = build_pyramid(load_feature_map(o.features), o.extra_levels);

  const HandMesh mesh = forward_kinematics(assets, params.pose, params.shape).mesh;
  const Eigen::VectorXd feature = aggregate(sample_vertex_features(mesh, *cam, pyramid, border), kind);
  write_sectioned(features_to_sectioned(feature), o.output);

  if (!o.regressor.empty()) {
    const ResidualRegressor regressor = load_regressor(o.regressor);
    const Residual residual = regressor.predict(feature);
    const RefineState refined =
        apply_residual(RefineState{params.pose, params.shape, *cam}, residual.pose_delta, residual.shape_delta);
    write_sectioned(params_to_sectioned(HandParams{refined.pose, refined.shape, refined.camera}), o.refined_output);
  }
  return kExitOk;
}

}  // namespace handkit::cli
