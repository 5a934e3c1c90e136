#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace handkit::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

namespace fs = std::filesystem;

struct FitOptions {
  fs::path landmarks;
  fs::path model;
  fs::path prior;
  fs::path ranges;
  fs::path out_dir;
  std::string image;
  std::string camera = "weak";
  int max_iters = 500;
  double step_size = 1e-2;
  double tol = 1e-9;
  double w_proj = 1.0;
  double w_bmc = 1.0;
  double w_prior = 1.0;
  std::string stages = "camera+global,all";
  double init_jitter = 0.0;
  std::uint64_t seed = 0;
};

struct FuseOptions {
  std::vector<fs::path> inputs;
  fs::path output;
  double iou = 0.5;
};

struct EvalPoseOptions {
  fs::path pred;
  fs::path gt;
  fs::path output;
  std::vector<double> f_thresholds = {5.0, 15.0};
  double auc_min = 0.0;
  double auc_max = 50.0;
  int auc_steps = 101;
  fs::path curve;
};

struct EvalDetOptions {
  fs::path pred;
  fs::path gt;
  fs::path output;
  double iou = 0.5;
  fs::path curve;
};

struct EvalTemporalOptions {
  fs::path pred;
  fs::path gt;
  fs::path output;
};

struct DecodeOptions {
  fs::path grid;
  fs::path output;
  std::string image = "image";
  double score_thresh = 0.5;
  double nms_thresh = 0.5;
};

struct PcaTrainOptions {
  fs::path corpus;
  fs::path output;
  int components = 0;
};

struct SynthModelOptions {
  fs::path output;
  fs::path ranges_output;
  int vertices = 778;
  std::uint64_t seed = 0;
};

struct SampleFeaturesOptions {
  fs::path model;
  fs::path params;
  fs::path features;
  fs::path output;
  fs::path regressor;
  fs::path refined_output;
  std::string aggregate = "mean";
  std::string border = "clamp";
  int extra_levels = 2;
};

// Each returns an exit code; library errors propagate as handkit::Error.
int run_fit(const FitOptions& o);
int run_fuse(const FuseOptions& o);
int run_eval_pose(const EvalPoseOptions& o);
int run_eval_det(const EvalDetOptions& o);
int run_eval_temporal(const EvalTemporalOptions& o);
int run_decode(const DecodeOptions& o);
int run_pca_train(const PcaTrainOptions& o);
int run_synth_model(const SynthModelOptions& o);
int run_sample_features(const SampleFeaturesOptions& o);

}  // namespace handkit::cli
