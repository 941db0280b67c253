#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct ModelSpec {
  // "builtin:ols", "builtin:logistic", "builtin:tree", "builtin:forest" or
  // "external".
  std::string name = "builtin:ols";
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 2;
  int epochs = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::string> external_argv;
  OutputKind external_output = OutputKind::kRegressionScore;
  double timeout_seconds = 60.0;

  bool is_external() const { return name == "external"; }
};

struct Sampling {
  bool enabled = false;
  std::size_t per_quantile = 10;
  std::size_t quantiles = 10;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::string data_path;
  std::optional<std::string> target;
  std::string missing_marker = "?";
  ImputePolicy impute = ImputePolicy::kMean;
  std::map<std::string, FeatureKind> kinds;
  ModelSpec model;
  std::vector<double> lambdas{0.75};
  std::vector<std::string> features;  // empty: all
  Sampling sampling;
  std::string format = "json";  // json | csv
  std::optional<std::string> output;
  std::size_t jobs = 0;  // 0: pick a default
  std::size_t chunk = 256;

  // compare
  std::vector<std::string> metrics{"fi", "perm"};
  std::size_t top_k = 2;
  std::optional<std::string> score;
  int repeats = 5;
  std::uint64_t perm_seed = 0;

  // plot-data
  std::string feature;
  bool centered = false;
};

// Throws InvalidArgument for inconsistent settings that can be detected
// without reading the data.
void validate(const RunConfig& config, const std::string& command);

// Each command writes its result to config.output (or `out` when unset) and
// returns an exit code. Errors propagate as exceptions.
int cmd_compute(const RunConfig& config, std::ostream& out);
int cmd_compare(const RunConfig& config, std::ostream& out);
int cmd_plot_data(const RunConfig& config, std::ostream& out);

// Full command line (args[0] is the program name). Never throws; maps errors
// to exit codes 1 (runtime) and 2 (usage/validation).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace iceimpact::cli
