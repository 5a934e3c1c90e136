#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "commands.hpp"
#include "handkit/error.hpp"
#include "handkit/sectioned_file.hpp"

namespace {

using namespace handkit::cli;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

CLI::Option* find_option(CLI::App& app, CLI::App* sub, const std::string& key) {
  const std::string flag = "--" + key;
  if (sub != nullptr) {
    if (auto* opt = sub->get_option_no_throw(flag)) return opt;
  }
  return app.get_option_no_throw(flag);
}

// key=value lines; '#' starts a comment. Flags given on the command line win.
void apply_config(CLI::App& app, CLI::App* sub, const std::string& path) {
  const std::string text = handkit::read_text_file(path);
  std::size_t number = 0;
  for (auto raw : handkit::split_lines(text)) {
    ++number;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(number);
    if (eq == std::string::npos) handkit::fail(handkit::Errc::kParse, where + ": expected key=value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "config") handkit::fail(handkit::Errc::kParse, where + ": config files do not nest");
    CLI::Option* opt = find_option(app, sub, key);
    if (opt == nullptr) handkit::fail(handkit::Errc::kParse, where + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    if (opt->get_expected_max() > 1) {
      for (auto tok : handkit::split_whitespace(value)) opt->add_result(std::string(tok));
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric hand fitting, detection post-processing and evaluation tools", "handkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  app.add_option("--seed", seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--config", config_path, "key=value file; explicit flags take precedence");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit pose, shape and camera to 2D landmarks");
  fit_cmd->add_option("--landmarks", fit.landmarks, "Landmark file");
  fit_cmd->add_option("--model", fit.model, "Hand model file");
  fit_cmd->add_option("--prior", fit.prior, "PCA prior file (optional)");
  fit_cmd->add_option("--ranges", fit.ranges, "Bone and angle ranges (default: derived from the model)");
  fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory");
  fit_cmd->add_option("--image", fit.image, "Fit only this image id");
  fit_cmd->add_option("--camera", fit.camera, "weak or perspective")->capture_default_str();
  fit_cmd->add_option("--max-iters", fit.max_iters, "Iterations per stage")->capture_default_str();
  fit_cmd->add_option("--step-size", fit.step_size, "Initial step size")->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol, "Convergence tolerance on objective decrease")->capture_default_str();
  fit_cmd->add_option("--w-proj", fit.w_proj, "Landmark term weight")->capture_default_str();
  fit_cmd->add_option("--w-bmc", fit.w_bmc, "Biomechanical term weight")->capture_default_str();
  fit_cmd->add_option("--w-prior", fit.w_prior, "Prior term weight")->capture_default_str();
  fit_cmd->add_option("--stages", fit.stages, "Stage schedule, e.g. camera+global,all")->capture_default_str();
  fit_cmd->add_option("--init-jitter", fit.init_jitter, "Seeded noise on the initial finger pose (rad)")
      ->capture_default_str();

  FuseOptions fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse detections from several detectors");
  fuse_cmd->add_option("--input", fuse.inputs, "Detection file (repeat per detector)");
  fuse_cmd->add_option("--output", fuse.output, "Fused detection file");
  fuse_cmd->add_option("--iou", fuse.iou, "Association IoU threshold")->capture_default_str();

  EvalPoseOptions eval_pose;
  auto* eval_pose_cmd = app.add_subcommand("eval-pose", "3D pose and mesh accuracy");
  eval_pose_cmd->add_option("--pred", eval_pose.pred, "Predicted poses file");
  eval_pose_cmd->add_option("--gt", eval_pose.gt, "Ground-truth poses file");
  eval_pose_cmd->add_option("--output", eval_pose.output, "Report file");
  eval_pose_cmd->add_option("--f-threshold", eval_pose.f_thresholds, "F-score thresholds in mm")
      ->capture_default_str();
  eval_pose_cmd->add_option("--auc-min", eval_pose.auc_min, "PCK range start (mm)")->capture_default_str();
  eval_pose_cmd->add_option("--auc-max", eval_pose.auc_max, "PCK range end (mm)")->capture_default_str();
  eval_pose_cmd->add_option("--auc-steps", eval_pose.auc_steps, "PCK thresholds")->capture_default_str();
  eval_pose_cmd->add_option("--curve", eval_pose.curve, "Write the joint PCK curve here");

  EvalDetOptions eval_det;
  auto* eval_det_cmd = app.add_subcommand("eval-det", "Detection average precision");
  eval_det_cmd->add_option("--pred", eval_det.pred, "Predicted detections");
  eval_det_cmd->add_option("--gt", eval_det.gt, "Ground-truth detections");
  eval_det_cmd->add_option("--output", eval_det.output, "Report file");
  eval_det_cmd->add_option("--iou", eval_det.iou, "IoU threshold for the single-threshold AP")
      ->capture_default_str();
  eval_det_cmd->add_option("--curve", eval_det.curve, "Write the precision-recall curve here");

  EvalTemporalOptions eval_temporal;
  auto* eval_temporal_cmd = app.add_subcommand("eval-temporal", "Temporal coherence of a pose sequence");
  eval_temporal_cmd->add_option("--pred", eval_temporal.pred, "Predicted sequence");
  eval_temporal_cmd->add_option("--gt", eval_temporal.gt, "Ground-truth sequence (enables rte)");
  eval_temporal_cmd->add_option("--output", eval_temporal.output, "Report file");

  DecodeOptions decode;
  auto* decode_cmd = app.add_subcommand("decode", "Decode dense grid predictions into detections");
  decode_cmd->add_option("--grid", decode.grid, "Grid prediction file");
  decode_cmd->add_option("--output", decode.output, "Detection file");
  decode_cmd->add_option("--image", decode.image, "Image id for the records")->capture_default_str();
  decode_cmd->add_option("--score-thresh", decode.score_thresh, "Minimum class score")->capture_default_str();
  decode_cmd->add_option("--nms-thresh", decode.nms_thresh, "NMS IoU threshold")->capture_default_str();

  PcaTrainOptions pca;
  auto* pca_cmd = app.add_subcommand("pca-train", "Train a mesh PCA prior");
  pca_cmd->add_option("--corpus", pca.corpus, "Mesh corpus file");
  pca_cmd->add_option("--output", pca.output, "Prior file");
  pca_cmd->add_option("--components", pca.components, "Number of components");

  SynthModelOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-model", "Generate a synthetic hand model");
  synth_cmd->add_option("--output", synth.output, "Model file");
  synth_cmd->add_option("--ranges-output", synth.ranges_output, "Also write default ranges here");
  synth_cmd->add_option("--vertices", synth.vertices, "Vertex count")->capture_default_str();

  SampleFeaturesOptions sample;
  auto* sample_cmd = app.add_subcommand("sample-features", "Sample and aggregate vertex features");
  sample_cmd->add_option("--model", sample.model, "Hand model file");
  sample_cmd->add_option("--params", sample.params, "Hand parameters (weak-perspective camera)");
  sample_cmd->add_option("--features", sample.features, "Base feature map");
  sample_cmd->add_option("--output", sample.output, "Aggregated feature file");
  sample_cmd->add_option("--regressor", sample.regressor, "Residual regressor (optional)");
  sample_cmd->add_option("--refined-output", sample.refined_output, "Refined parameters (with --regressor)");
  sample_cmd->add_option("--aggregate", sample.aggregate, "mean, max or sum")->capture_default_str();
  sample_cmd->add_option("--border", sample.border, "clamp or zeros")->capture_default_str();
  sample_cmd->add_option("--extra-levels", sample.extra_levels, "Upsampled pyramid levels")->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) apply_config(app, sub, config_path);
    fit.seed = seed;
    synth.seed = seed;

    const std::string name = sub->get_name();
    if (name == "fit") return run_fit(fit);
    if (name == "fuse") return run_fuse(fuse);
    if (name == "eval-pose") return run_eval_pose(eval_pose);
    if (name == "eval-det") return run_eval_det(eval_det);
    if (name == "eval-temporal") return run_eval_temporal(eval_temporal);
    if (name == "decode") return run_decode(decode);
    if (name == "pca-train") return run_pca_train(pca);
    if (name == "synth-model") return run_synth_model(synth);
    if (name == "sample-features") return run_sample_features(sample);
  } catch (const handkit::Error& e) {
    std::cerr << "handkit " << sub->get_name() << ": " << e.what() << "\n";
    return kExitInputError;
  } catch (const CLI::ParseError& e) {
    std::cerr << "handkit " << sub->get_name() << ": " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "handkit " << sub->get_name() << ": " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
