#pragma once

// Input files for every subcommand plus a thin process runner, shared by the
// CLI tests and the acceptance binary.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace handkit::testing {

namespace fs = std::filesystem;

// Fresh empty directory under the system temp directory.
fs::path fresh_dir(const std::string& name);

// Runs `exe args`, sending stdout and stderr to `log`; returns the exit status.
int run_cli(const fs::path& exe, const std::string& args, const fs::path& log);

struct CliFixtures {
  fs::path dir;
  fs::path model;        // synth_model(11, 300)
  fs::path ranges;
  fs::path landmarks;    // two exact synthetic scenes: scene_a, scene_b
  fs::path corpus;       // 8 posed meshes of the model
  fs::path rank2_corpus; // rank-2 corpus, 30 coordinates
  fs::path det_a;        // (0,0,10,10) at 0.6 on img0, plus img1 boxes
  fs::path det_b;        // (2,2,12,12) at 0.2 on img0
  fs::path det_gt;       // three images, one right hand each
  fs::path det_pred;     // TP 0.9, FP 0.8, TP 0.7: AP = 1/3 + 2/9
  fs::path poses_gt;
  fs::path poses_pred;   // similarity transforms of the ground truth
  fs::path sequence_gt;
  fs::path sequence_pred;
  fs::path grid;         // one cell decoding to (12,12,36,36), right hand
  fs::path params;
  fs::path features;
  fs::path regressor;    // zero regressor
};

CliFixtures write_cli_fixtures(const fs::path& dir);

struct CliCommand {
  std::string name;
  std::string args;  // "{out}" stands for the output directory
};

// One invocation per subcommand; all outputs go below {out}.
std::vector<CliCommand> subcommand_suite(const CliFixtures& fx);

// Runs the suite into `out`; returns the exit status per command name.
std::map<std::string, int> run_suite(const fs::path& exe, const CliFixtures& fx, const fs::path& out);

// Relative path -> file contents for every regular file below `dir`, log
// files excluded.
std::map<std::string, std::string> snapshot(const fs::path& dir);

std::string slurp(const fs::path& path);

}  // namespace handkit::testing
