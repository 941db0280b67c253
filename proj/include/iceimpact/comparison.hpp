#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/impact.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact {

// Named per-feature values in dataset feature order.
struct MetricVector {
  std::string metric_name;
  std::vector<std::string> features;
  std::vector<double> values;
  bool normalized = false;

  double at(const std::string& feature) const;
};

enum class Score { kAccuracy, kAuc, kR2 };

std::string to_string(Score score);
Score parse_score(const std::string& text);
// accuracy for probability outputs, r2 for regression scores.
Score default_score(OutputKind output);

// Scores predictions against a target. Accuracy thresholds at 0.5. AUC and
// accuracy need a 0/1 target.
double score_predictions(Score score, const std::vector<double>& target,
                         const std::vector<double>& predictions);

struct PermutationOptions {
  Score score = Score::kAccuracy;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<std::size_t> features;  // empty: every feature
};

// Mean drop in score when one column is shuffled. Every (feature, repeat)
// pair draws its permutation from its own seeded stream, so results do not
// depend on scheduling.
MetricVector permutation_importance(const Dataset& dataset, const PredictorHandle& predictor,
                                    const PermutationOptions& options);

// Impurity decrease accumulated while growing a built-in forest or tree,
// normalized to sum to 100. Throws InvalidArgument for other predictors.
MetricVector impurity_importance(const Predictor& predictor, const std::vector<std::string>& features);

// Absolute values rescaled to sum to 100. Throws InvalidArgument when every
// value is zero.
MetricVector normalize(const MetricVector& values);

// Pearson correlation over matching features. Throws InvalidArgument for
// mismatched feature sets, fewer than two features or zero variance.
double pearson(const MetricVector& a, const MetricVector& b);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// --- report --------------------------------------------------------------------

// Metric identifiers understood by report():
//   fi, fi_directional, idfi:<lambda>, he, nl, perm, impurity
struct MetricSpec {
  enum class Kind { kFi, kFiDirectional, kIdfi, kHeterogeneity, kNonLinearity, kPermutation, kImpurity };
  Kind kind;
  double lambda = 1.0;  // idfi only

  std::string name() const;
};
MetricSpec parse_metric(const std::string& text);

struct Difference {
  std::string feature;
  double reference = 0.0;
  double other = 0.0;
  double difference = 0.0;  // reference - other, both normalized
};

struct DifferenceTable {
  std::string reference;
  std::string other;
  std::vector<Difference> top_positive;  // largest first
  std::vector<Difference> top_negative;  // most negative first
};

struct ImpactReport {
  std::vector<std::string> features;
  std::vector<FeatureImpactResult> impacts;
  std::vector<double> lambdas;
  std::vector<std::string> metric_names;
  std::vector<MetricVector> raw;         // one per metric
  std::vector<MetricVector> normalized;  // one per metric; all zeros when unnormalizable
  // correlation[a][b]; nullopt when undefined (constant vector).
  std::vector<std::vector<std::optional<double>>> correlation;
  std::vector<DifferenceTable> differences;
  std::vector<std::string> notes;
};

struct ReportOptions {
  AnalysisOptions analysis;
  PermutationOptions permutation;
  std::vector<std::size_t> features;  // empty: every feature
  std::size_t top_k = 2;
};

// Difference tables of `reference` against each other vector, top_k each way.
DifferenceTable difference_table(const MetricVector& reference, const MetricVector& other,
                                 std::size_t top_k);

ImpactReport report(const Dataset& dataset, const PredictorHandle& predictor,
                    const std::vector<MetricSpec>& metrics, const std::vector<double>& lambdas,
                    const ReportOptions& options = {});

}  // namespace iceimpact
