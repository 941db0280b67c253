#include "iceimpact/cli.hpp"

#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "CLI11.hpp"

#include "iceimpact/comparison.hpp"
#include "iceimpact/error.hpp"
#include "iceimpact/impact.hpp"
#include "iceimpact/plotdata.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact::cli {

namespace {

const std::vector<std::string> kModels{"builtin:ols", "builtin:logistic", "builtin:tree",
                                       "builtin:forest", "external"};

std::size_t resolve_jobs(const RunConfig& config) {
  if (config.jobs > 0) return config.jobs;
  if (const char* env = std::getenv("ICE_IMPACT_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  if (config.model.is_external()) return 1;
  return std::max(1u, std::thread::hardware_concurrency());
}

Dataset load(const RunConfig& config) {
  CsvOptions csv;
  csv.target = config.target;
  csv.missing_marker = config.missing_marker;
  csv.impute = config.impute;
  Dataset dataset = load_csv(config.data_path, csv);
  if (!config.kinds.empty()) dataset = dataset.with_kinds(config.kinds);
  return dataset;
}

PredictorHandle make_model(const RunConfig& config, const Dataset& dataset) {
  const ModelSpec& m = config.model;
  if (m.is_external()) {
    ExternalOptions options;
    options.timeout = std::chrono::milliseconds(static_cast<long long>(m.timeout_seconds * 1000.0));
    options.output = m.external_output;
    options.n_features = dataset.n_features();
    return external_predictor(m.external_argv, options);
  }
  if (m.name == "builtin:ols") return std::make_shared<LinearPredictor>(fit_ols(dataset));
  if (m.name == "builtin:logistic") {
    return fit_logistic(dataset, {m.epochs, m.learning_rate, m.seed});
  }
  if (m.name == "builtin:tree") return fit_tree(dataset, m.max_depth, m.min_leaf, m.seed);
  ForestOptions options;
  options.n_trees = m.n_trees;
  options.max_depth = m.max_depth;
  options.min_leaf = m.min_leaf;
  options.seed = m.seed;
  return fit_forest(dataset, options);
}

std::vector<std::size_t> selected_features(const RunConfig& config, const Dataset& dataset) {
  std::vector<std::size_t> out;
  if (config.features.empty()) {
    out.resize(dataset.n_features());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  for (const auto& name : config.features) out.push_back(dataset.feature_index(name));
  return out;
}

Json provenance(const RunConfig& config, const Dataset& dataset, const Predictor& model,
                const std::vector<double>& lambdas, const std::string& stratified_by = {},
                const std::vector<std::int64_t>& sampled_ids = {}) {
  Json p;
  p["data"] = config.data_path;
  p["target"] = config.target ? Json(*config.target) : Json(nullptr);
  p["missing_marker"] = config.missing_marker;
  p["impute"] = config.impute == ImputePolicy::kMean ? "mean" : "drop-row";
  p["n_rows"] = dataset.n_rows();
  p["n_features"] = dataset.n_features();
  Json kinds = Json::object();
  for (const auto& [name, kind] : config.kinds) kinds[name] = to_string(kind);
  p["kind_overrides"] = kinds;

  Json mj;
  mj["spec"] = config.model.name;
  mj["kind"] = to_string(model.kind());
  mj["output_kind"] = to_string(model.output_kind());
  Json meta = Json::object();
  for (const auto& [k, v] : model.metadata()) meta[k] = v;
  mj["metadata"] = meta;
  p["model"] = mj;

  Json lj = Json::array();
  for (double l : lambdas) lj.push_back(l);
  p["lambdas"] = lj;
  p["sigma_source"] = "sample standard deviation (n-1) of each feature in the interrogated dataset";
  if (config.sampling.enabled) {
    p["rows"] = {{"sampled", true},
                 {"per_quantile", config.sampling.per_quantile},
                 {"quantiles", config.sampling.quantiles},
                 {"seed", config.sampling.seed},
                 {"stratified_by", stratified_by},
                 {"row_ids", sampled_ids}};
  } else {
    p["rows"] = {{"sampled", false}};
  }
  p["notes"] = {
      "built-in models are reference models for self-contained runs",
      "tree SHAP values are not computed"};
  return p;
}

AnalysisOptions analysis_options(const RunConfig& config) {
  AnalysisOptions options;
  options.grid.chunk_observations = config.chunk;
  options.jobs = resolve_jobs(config);
  return options;
}

void emit(const RunConfig& config, const std::string& text, std::ostream& out) {
  if (!config.output) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream file(*config.output, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot write '" + *config.output + "'");
  file << text;
  if (!file) throw Error("failed writing '" + *config.output + "'");
}

}  // namespace

void validate(const RunConfig& config, const std::string& command) {
  if (config.data_path.empty()) throw InvalidArgument("--data is required");
  if (std::find(kModels.begin(), kModels.end(), config.model.name) == kModels.end()) {
    throw InvalidArgument("unknown model '" + config.model.name + "'");
  }
  if (config.model.is_external() && config.model.external_argv.empty()) {
    throw InvalidArgument("--model external needs a command after '--'");
  }
  if (!config.model.is_external() && !config.model.external_argv.empty()) {
    throw InvalidArgument("an external command was given but --model is " + config.model.name);
  }
  if (!config.model.is_external() && !config.target) {
    throw InvalidArgument("built-in models need --target");
  }
  if (!(config.model.timeout_seconds > 0.0)) throw InvalidArgument("--timeout must be positive");
  if (config.lambdas.empty()) throw InvalidArgument("at least one --lambda is required");
  for (double l : config.lambdas) validate_lambda(l);
  if (config.format != "json" && config.format != "csv") {
    throw InvalidArgument("--format must be json or csv");
  }
  if (config.chunk == 0) throw InvalidArgument("--chunk must be at least 1");
  if (config.sampling.per_quantile == 0 || config.sampling.quantiles == 0) {
    throw InvalidArgument("--per-quantile and --quantiles must be at least 1");
  }

  if (command == "compare") {
    if (config.metrics.empty()) throw InvalidArgument("--metrics needs at least one metric");
    for (const auto& m : config.metrics) {
      const MetricSpec spec = parse_metric(m);
      if (spec.kind == MetricSpec::Kind::kImpurity && config.model.name != "builtin:forest" &&
          config.model.name != "builtin:tree") {
        throw InvalidArgument("metric 'impurity' needs --model builtin:forest or builtin:tree (got " +
                              config.model.name + ")");
      }
      if (spec.kind == MetricSpec::Kind::kPermutation && !config.target) {
        throw InvalidArgument("metric 'perm' needs --target");
      }
    }
    if (config.score) parse_score(*config.score);
    if (config.repeats < 1) throw InvalidArgument("--repeats must be at least 1");
  }
  if (command == "plot-data" && config.feature.empty()) {
    throw InvalidArgument("--feature is required");
  }
}

int cmd_compute(const RunConfig& config, std::ostream& out) {
  validate(config, "compute");
  const Dataset dataset = load(config);
  const std::vector<std::size_t> features = selected_features(config, dataset);
  PredictorHandle model = make_model(config, dataset);

  AnalysisOptions options = analysis_options(config);
  if (config.sampling.enabled) {
    // One shared sample keyed to the first selected feature keeps every
    // feature's curves on the same observations.
    options.row_ids = sample_rows(dataset, features.front(), config.sampling.per_quantile,
                                  config.sampling.quantiles, config.sampling.seed);
  }
  const auto impacts = analyze_features(dataset, model, features, config.lambdas, options);
  model->finish();

  const std::string text = config.format == "json"
                               ? dump(impacts_json(dataset, impacts,
                                                   provenance(config, dataset, *model, config.lambdas,
                                                              dataset.feature(features.front()).name,
                                                              options.row_ids)))
                               : impacts_csv(dataset, impacts);
  emit(config, text, out);
  return kExitOk;
}

int cmd_compare(const RunConfig& config, std::ostream& out) {
  validate(config, "compare");
  const Dataset dataset = load(config);
  std::vector<MetricSpec> metrics;
  for (const auto& m : config.metrics) metrics.push_back(parse_metric(m));
  PredictorHandle model = make_model(config, dataset);

  ReportOptions options;
  options.analysis = analysis_options(config);
  options.features = selected_features(config, dataset);
  options.top_k = config.top_k;
  options.permutation.score =
      config.score ? parse_score(*config.score) : default_score(model->output_kind());
  options.permutation.repeats = config.repeats;
  options.permutation.seed = config.perm_seed;
  options.permutation.jobs = options.analysis.jobs;
  if (config.sampling.enabled) {
    options.analysis.row_ids = sample_rows(dataset, options.features.front(),
                                           config.sampling.per_quantile, config.sampling.quantiles,
                                           config.sampling.seed);
  }

  const ImpactReport rep = report(dataset, model, metrics, config.lambdas, options);
  model->finish();

  std::string text;
  if (config.format == "json") {
    Json prov = provenance(config, dataset, *model, rep.lambdas,
                           dataset.feature(options.features.front()).name, options.analysis.row_ids);
    prov["permutation"] = {{"score", to_string(options.permutation.score)},
                           {"repeats", options.permutation.repeats},
                           {"seed", options.permutation.seed}};
    prov["top_k"] = config.top_k;
    text = dump(report_json(rep, prov));
  } else {
    text = report_csv(rep);
  }
  emit(config, text, out);
  return kExitOk;
}

namespace {

std::vector<std::int64_t> sampled_ids(const CurveSet& curves) {
  std::vector<std::int64_t> ids;
  for (const auto& c : curves.curves) ids.push_back(c.row_id);
  return ids;
}

}  // namespace

int cmd_plot_data(const RunConfig& config, std::ostream& out) {
  validate(config, "plot-data");
  const Dataset dataset = load(config);
  const std::size_t feature = dataset.feature_index(config.feature);
  PredictorHandle model = make_model(config, dataset);

  SamplingConfig sampling;
  sampling.enabled = config.sampling.enabled;
  sampling.per_quantile = config.sampling.per_quantile;
  sampling.quantiles = config.sampling.quantiles;
  sampling.seed = config.sampling.seed;
  GridOptions grid;
  grid.chunk_observations = config.chunk;
  const CurveSet curves = config.centered ? c_ice_curves(dataset, *model, feature, sampling, grid)
                                          : ice_curves(dataset, *model, feature, sampling, grid);
  model->finish();

  const std::string text =
      config.format == "json"
          ? dump(curves_json(curves, provenance(config, dataset, *model, config.lambdas,
                                                config.feature, sampled_ids(curves))))
          : curves_csv(curves);
  emit(config, text, out);
  return kExitOk;
}

namespace {

void add_common(CLI::App& sub, RunConfig& c, std::string& impute, std::vector<std::string>& kinds,
                std::string& external_output) {
  sub.add_option("--data", c.data_path, "Input CSV with a header row")->required();
  sub.add_option("--target", c.target, "Target column (excluded from features)");
  sub.add_option("--missing-marker", c.missing_marker, "Cell text marking a missing value")
      ->capture_default_str();
  sub.add_option("--impute", impute, "Missing-value policy: mean or drop-row")
      ->check(CLI::IsMember({"mean", "drop-row"}))
      ->capture_default_str();
  sub.add_option("--kind", kinds, "Feature kind override NAME=continuous|categorical-ordinal|binary");
  sub.add_option("--model", c.model.name, "builtin:ols|builtin:logistic|builtin:tree|builtin:forest|external")
      ->check(CLI::IsMember(kModels))
      ->capture_default_str();
  sub.add_option("--trees", c.model.n_trees, "Forest size")->capture_default_str();
  sub.add_option("--max-depth", c.model.max_depth, "Tree depth limit")->capture_default_str();
  sub.add_option("--min-leaf", c.model.min_leaf, "Minimum samples per leaf")->capture_default_str();
  sub.add_option("--epochs", c.model.epochs, "Logistic regression epochs")->capture_default_str();
  sub.add_option("--learning-rate", c.model.learning_rate, "Logistic regression step size")
      ->capture_default_str();
  sub.add_option("--seed", c.model.seed, "Model seed")->capture_default_str();
  sub.add_option("--external-output", external_output, "External model output: score or probability")
      ->check(CLI::IsMember({"score", "probability"}))
      ->capture_default_str();
  sub.add_option("--timeout", c.model.timeout_seconds, "External batch timeout in seconds")
      ->capture_default_str();
  sub.add_option("--lambda", c.lambdas, "In-distribution decay, each in (0, 1]")
      ->delimiter(',')
      ->capture_default_str();
  sub.add_option("--features", c.features, "Restrict analysis to these feature names")->delimiter(',');
  sub.add_option("--per-quantile", c.sampling.per_quantile, "Rows sampled per stratum")
      ->capture_default_str();
  sub.add_option("--quantiles", c.sampling.quantiles, "Strata for continuous features")
      ->capture_default_str();
  sub.add_option("--sample-seed", c.sampling.seed, "Row sampling seed")->capture_default_str();
  sub.add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sub.add_option("--output", c.output, "Output file (stdout when omitted)");
  sub.add_option("--jobs", c.jobs, "Worker threads (default: $ICE_IMPACT_JOBS, else 1 for external "
                                   "models and the core count otherwise)");
  sub.add_option("--chunk", c.chunk, "Observations per prediction batch")->capture_default_str();
  sub.add_option("command", c.model.external_argv, "External model command, after '--'");
}

std::string describe(const std::exception& e) {
  std::string text = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    text += "\n  caused by: " + describe(inner);
  } catch (...) {
  }
  return text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  std::string impute = "mean";
  std::vector<std::string> kinds;
  std::string external_output = "score";
  bool no_sample = false;

  CLI::App app{"ICE feature impact: how strongly each feature moves a model's predictions"};
  app.name(args.empty() ? "ice_impact" : args.front());
  app.require_subcommand(1);

  auto* compute = app.add_subcommand("compute", "Per-feature impact, in-distribution impact, "
                                                "heterogeneity and non-linearity");
  add_common(*compute, config, impute, kinds, external_output);
  compute->add_flag("--sample", config.sampling.enabled,
                    "Analyse a quantile-stratified row sample instead of every row");

  auto* compare = app.add_subcommand("compare", "Compare impact with importance metrics");
  add_common(*compare, config, impute, kinds, external_output);
  compare->add_option("--metrics", config.metrics,
                      "fi, fi_directional, idfi:<lambda>, he, nl, perm, impurity")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--top-k", config.top_k, "Rows per difference table direction")
      ->capture_default_str();
  compare->add_option("--score", config.score, "Permutation score: accuracy, auc or r2");
  compare->add_option("--repeats", config.repeats, "Permutation repeats")->capture_default_str();
  compare->add_option("--perm-seed", config.perm_seed, "Permutation seed")->capture_default_str();
  compare->add_flag("--sample", config.sampling.enabled, "Analyse a stratified row sample");

  auto* plot = app.add_subcommand("plot-data", "Export ICE or centered ICE curve data");
  add_common(*plot, config, impute, kinds, external_output);
  plot->add_option("--feature", config.feature, "At-issue feature name")->required();
  plot->add_flag("--centered", config.centered, "Center each curve at its leftmost point");
  plot->add_flag("--no-sample", no_sample, "Emit a curve for every row");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    config.impute = impute == "drop-row" ? ImputePolicy::kDropRow : ImputePolicy::kMean;
    config.model.external_output =
        external_output == "probability" ? OutputKind::kProbability : OutputKind::kRegressionScore;
    for (const auto& k : kinds) {
      const auto eq = k.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw InvalidArgument("--kind expects NAME=KIND, got '" + k + "'");
      }
      config.kinds[k.substr(0, eq)] = parse_feature_kind(k.substr(eq + 1));
    }
    if (*plot) {
      config.sampling.enabled = !no_sample;
      return cmd_plot_data(config, out);
    }
    if (*compare) return cmd_compare(config, out);
    return cmd_compute(config, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << describe(e) << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << describe(e) << "\n";
    return kExitFailure;
  } catch (...) {
    err << "error: unknown failure\n";
    return kExitFailure;
  }
}

}  // namespace iceimpact::cli
