#include "iceimpact/comparison.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "iceimpact/error.hpp"
#include "iceimpact/random.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact {

double MetricVector::at(const std::string& feature) const {
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j] == feature) return values[j];
  }
  throw InvalidArgument("metric '" + metric_name + "' has no feature '" + feature + "'");
}

std::string to_string(Score score) {
  switch (score) {
    case Score::kAccuracy:
      return "accuracy";
    case Score::kAuc:
      return "auc";
    case Score::kR2:
      return "r2";
  }
  return "unknown";
}

Score parse_score(const std::string& text) {
  if (text == "accuracy") return Score::kAccuracy;
  if (text == "auc") return Score::kAuc;
  if (text == "r2") return Score::kR2;
  throw InvalidArgument("unknown score '" + text + "' (expected accuracy, auc or r2)");
}

Score default_score(OutputKind output) {
  return output == OutputKind::kProbability ? Score::kAccuracy : Score::kR2;
}

namespace {

bool is_binary(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double auc(const std::vector<double>& target, const std::vector<double>& scores) {
  // Mann-Whitney U with average ranks for ties.
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  double positives = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] == 1.0) {
      positives += 1.0;
      rank_sum += ranks[i];
    }
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw InvalidArgument("auc needs both classes in the target");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

}  // namespace

double score_predictions(Score score, const std::vector<double>& target,
                         const std::vector<double>& predictions) {
  if (target.size() != predictions.size() || target.empty()) {
    throw InvalidArgument("target and prediction lengths differ or are empty");
  }
  switch (score) {
    case Score::kAccuracy: {
      if (!is_binary(target)) throw InvalidArgument("accuracy needs a 0/1 target");
      std::size_t hits = 0;
      for (std::size_t i = 0; i < target.size(); ++i) {
        const double label = predictions[i] >= 0.5 ? 1.0 : 0.0;
        if (label == target[i]) ++hits;
      }
      return static_cast<double>(hits) / static_cast<double>(target.size());
    }
    case Score::kAuc:
      if (!is_binary(target)) throw InvalidArgument("auc needs a 0/1 target");
      return auc(target, predictions);
    case Score::kR2: {
      const double m = stats::mean(target);
      double ss_tot = 0.0;
      double ss_res = 0.0;
      for (std::size_t i = 0; i < target.size(); ++i) {
        ss_tot += (target[i] - m) * (target[i] - m);
        ss_res += (target[i] - predictions[i]) * (target[i] - predictions[i]);
      }
      if (ss_tot == 0.0) throw InvalidArgument("r2 is undefined for a constant target");
      return 1.0 - ss_res / ss_tot;
    }
  }
  return 0.0;
}

MetricVector permutation_importance(const Dataset& dataset, const PredictorHandle& predictor,
                                    const PermutationOptions& options) {
  const Target& target = dataset.require_target();
  if (options.repeats < 1) throw InvalidArgument("repeats must be at least 1");
  if ((options.score == Score::kAccuracy || options.score == Score::kAuc) &&
      !is_binary(target.values)) {
    throw InvalidArgument(to_string(options.score) + " is incompatible with a non-binary target (" +
                          to_string(predictor->output_kind()) + " output)");
  }

  std::vector<std::size_t> features = options.features;
  if (features.empty()) {
    features.resize(dataset.n_features());
    std::iota(features.begin(), features.end(), std::size_t{0});
  }
  for (std::size_t f : features) dataset.feature(f);

  const double baseline =
      score_predictions(options.score, target.values, predictor->predict(dataset.rows()));

  MetricVector out;
  out.metric_name = "perm";
  out.values.assign(features.size(), 0.0);
  for (std::size_t f : features) out.features.push_back(dataset.feature(f).name);

  std::vector<std::exception_ptr> errors(features.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t slot; (slot = next.fetch_add(1)) < features.size();) {
      try {
        const std::size_t f = features[slot];
        double total = 0.0;
        for (int r = 0; r < options.repeats; ++r) {
          Rng rng = make_rng(options.seed, {f, static_cast<std::uint64_t>(r)});
          std::vector<double> column = dataset.column(f);
          shuffle(column, rng);
          Matrix shuffled = dataset.rows();
          for (std::size_t i = 0; i < shuffled.rows(); ++i) shuffled(i, f) = column[i];
          total += baseline -
                   score_predictions(options.score, target.values, predictor->predict(shuffled));
        }
        out.values[slot] = total / static_cast<double>(options.repeats);
      } catch (...) {
        errors[slot] = std::current_exception();
      }
    }
  };

  const std::size_t jobs =
      predictor->concurrent() ? std::max<std::size_t>(1, std::min(options.jobs, features.size())) : 1;
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < jobs; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

MetricVector impurity_importance(const Predictor& predictor, const std::vector<std::string>& features) {
  const auto* forest = dynamic_cast<const ForestPredictor*>(&predictor);
  if (forest == nullptr) {
    throw InvalidArgument("impurity importance needs a built-in forest or tree, got " +
                          to_string(predictor.kind()));
  }
  if (features.size() != forest->impurity_decrease().size()) {
    throw InvalidArgument("feature name count does not match the forest's feature count");
  }
  MetricVector raw{"impurity", features, forest->impurity_decrease(), false};
  const bool any = std::any_of(raw.values.begin(), raw.values.end(), [](double v) { return v != 0.0; });
  if (!any) {
    // No split anywhere: nothing earned any share.
    raw.normalized = true;
    return raw;
  }
  return normalize(raw);
}

MetricVector normalize(const MetricVector& values) {
  double total = 0.0;
  for (double v : values.values) total += std::abs(v);
  if (total == 0.0) {
    throw InvalidArgument("cannot normalize metric '" + values.metric_name + "': all values are zero");
  }
  MetricVector out = values;
  for (double& v : out.values) v = 100.0 * (std::abs(v) / total);
  out.normalized = true;
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidArgument("pearson needs vectors of equal length");
  if (a.size() < 2) throw InvalidArgument("pearson needs at least two features");
  const double ma = stats::mean(a);
  const double mb = stats::mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw InvalidArgument("pearson is undefined for a zero-variance vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const MetricVector& a, const MetricVector& b) {
  if (std::set<std::string>(a.features.begin(), a.features.end()) !=
          std::set<std::string>(b.features.begin(), b.features.end()) ||
      a.features.size() != b.features.size()) {
    throw InvalidArgument("pearson needs metric vectors over the same features");
  }
  std::vector<double> aligned(b.features.size());
  for (std::size_t j = 0; j < a.features.size(); ++j) aligned[j] = b.at(a.features[j]);
  return pearson(a.values, aligned);
}

// --- report --------------------------------------------------------------------

std::string MetricSpec::name() const {
  switch (kind) {
    case Kind::kFi:
      return "fi";
    case Kind::kFiDirectional:
      return "fi_directional";
    case Kind::kIdfi:
      return "idfi:" + format_shortest(lambda);
    case Kind::kHeterogeneity:
      return "he";
    case Kind::kNonLinearity:
      return "nl";
    case Kind::kPermutation:
      return "perm";
    case Kind::kImpurity:
      return "impurity";
  }
  return "unknown";
}

MetricSpec parse_metric(const std::string& text) {
  using Kind = MetricSpec::Kind;
  if (text == "fi") return {Kind::kFi};
  if (text == "fi_directional") return {Kind::kFiDirectional};
  if (text == "he") return {Kind::kHeterogeneity};
  if (text == "nl") return {Kind::kNonLinearity};
  if (text == "perm") return {Kind::kPermutation};
  if (text == "impurity") return {Kind::kImpurity};
  if (text.rfind("idfi:", 0) == 0) {
    const std::string number = text.substr(5);
    double lambda = 0.0;
    auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), lambda);
    if (ec != std::errc() || ptr != number.data() + number.size()) {
      throw InvalidArgument("cannot parse lambda in metric '" + text + "'");
    }
    validate_lambda(lambda);
    return {Kind::kIdfi, lambda};
  }
  throw InvalidArgument("unknown metric '" + text +
                        "' (expected fi, fi_directional, idfi:<lambda>, he, nl, perm, impurity)");
}

DifferenceTable difference_table(const MetricVector& reference, const MetricVector& other,
                                 std::size_t top_k) {
  DifferenceTable table;
  table.reference = reference.metric_name;
  table.other = other.metric_name;
  std::vector<Difference> all;
  for (std::size_t j = 0; j < reference.features.size(); ++j) {
    const double o = other.at(reference.features[j]);
    all.push_back({reference.features[j], reference.values[j], o, reference.values[j] - o});
  }
  // Ties keep feature order.
  std::vector<Difference> desc = all;
  std::stable_sort(desc.begin(), desc.end(),
                   [](const Difference& a, const Difference& b) { return a.difference > b.difference; });
  for (const auto& d : desc) {
    if (table.top_positive.size() == top_k) break;
    if (d.difference > 0.0) table.top_positive.push_back(d);
  }
  std::vector<Difference> asc = all;
  std::stable_sort(asc.begin(), asc.end(),
                   [](const Difference& a, const Difference& b) { return a.difference < b.difference; });
  for (const auto& d : asc) {
    if (table.top_negative.size() == top_k) break;
    if (d.difference < 0.0) table.top_negative.push_back(d);
  }
  return table;
}

ImpactReport report(const Dataset& dataset, const PredictorHandle& predictor,
                    const std::vector<MetricSpec>& metrics, const std::vector<double>& lambdas,
                    const ReportOptions& options) {
  using Kind = MetricSpec::Kind;
  if (metrics.empty()) throw InvalidArgument("report needs at least one metric");
  for (double lambda : lambdas) validate_lambda(lambda);

  std::vector<std::size_t> features = options.features;
  if (features.empty()) {
    features.resize(dataset.n_features());
    std::iota(features.begin(), features.end(), std::size_t{0});
  }

  ImpactReport rep;
  for (std::size_t f : features) rep.features.push_back(dataset.feature(f).name);
  rep.lambdas = lambdas;
  for (const auto& m : metrics) {
    if (m.kind == Kind::kIdfi &&
        std::find(rep.lambdas.begin(), rep.lambdas.end(), m.lambda) == rep.lambdas.end()) {
      rep.lambdas.push_back(m.lambda);
    }
    if (m.kind == Kind::kImpurity && dynamic_cast<const ForestPredictor*>(predictor.get()) == nullptr) {
      throw InvalidArgument("impurity importance needs a built-in forest or tree model, got " +
                            to_string(predictor->kind()));
    }
  }

  rep.impacts = analyze_features(dataset, predictor, features, rep.lambdas, options.analysis);

  auto from_impacts = [&](const std::string& name, auto getter) {
    MetricVector v{name, rep.features, {}, false};
    for (const auto& r : rep.impacts) v.values.push_back(getter(r));
    return v;
  };

  for (const auto& m : metrics) {
    MetricVector raw;
    switch (m.kind) {
      case Kind::kFi:
        raw = from_impacts(m.name(), [](const FeatureImpactResult& r) { return r.fi; });
        break;
      case Kind::kFiDirectional:
        raw = from_impacts(m.name(), [](const FeatureImpactResult& r) { return r.fi_directional; });
        break;
      case Kind::kIdfi:
        raw = from_impacts(m.name(), [&](const FeatureImpactResult& r) { return r.idfi.at(m.lambda); });
        break;
      case Kind::kHeterogeneity:
        raw = from_impacts(m.name(), [](const FeatureImpactResult& r) { return r.heterogeneity; });
        break;
      case Kind::kNonLinearity:
        raw = from_impacts(m.name(), [](const FeatureImpactResult& r) { return r.non_linearity; });
        break;
      case Kind::kPermutation: {
        PermutationOptions perm = options.permutation;
        perm.features = features;
        raw = permutation_importance(dataset, predictor, perm);
        break;
      }
      case Kind::kImpurity: {
        const auto* forest = dynamic_cast<const ForestPredictor*>(predictor.get());
        raw = MetricVector{m.name(), rep.features, {}, false};
        for (std::size_t f : features) raw.values.push_back(forest->impurity_decrease()[f]);
        break;
      }
    }
    rep.metric_names.push_back(m.name());
    rep.raw.push_back(raw);
    try {
      rep.normalized.push_back(normalize(raw));
    } catch (const InvalidArgument&) {
      MetricVector zeros = raw;
      std::fill(zeros.values.begin(), zeros.values.end(), 0.0);
      rep.normalized.push_back(zeros);
      rep.notes.push_back("metric '" + m.name() + "' is zero for every feature; left unnormalized");
    }
  }

  const std::size_t k = rep.normalized.size();
  rep.correlation.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      try {
        const double r = pearson(rep.normalized[a], rep.normalized[b]);
        rep.correlation[a][b] = a == b ? 1.0 : r;
      } catch (const InvalidArgument&) {
        rep.correlation[a][b] = std::nullopt;
      }
    }
  }

  std::size_t ref = 0;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (metrics[i].kind == Kind::kFi) {
      ref = i;
      break;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (i == ref) continue;
    rep.differences.push_back(difference_table(rep.normalized[ref], rep.normalized[i], options.top_k));
  }

  rep.notes.push_back("tree SHAP values are not computed by this tool");
  rep.notes.push_back("sigma is the sample standard deviation (n-1) of the interrogated dataset");
  return rep;
}

}  // namespace iceimpact
