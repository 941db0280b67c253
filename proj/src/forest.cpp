#include <algorithm>
#include <cmath>
#include <numeric>

#include "iceimpact/error.hpp"
#include "iceimpact/predictors.hpp"
#include "iceimpact/random.hpp"

namespace iceimpact {

double DecisionTree::evaluate(std::span<const double> row) const {
  std::size_t node = 0;
  while (nodes[node].feature != TreeNode::kLeaf) {
    const TreeNode& n = nodes[node];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[node].value;
}

ForestPredictor::ForestPredictor(std::vector<DecisionTree> trees, std::size_t n_features,
                                 bool classification, std::vector<double> impurity_decrease,
                                 PredictorKind kind, std::map<std::string, std::string> metadata)
    : trees_(std::move(trees)),
      n_features_(n_features),
      classification_(classification),
      impurity_decrease_(std::move(impurity_decrease)),
      kind_(kind) {
  metadata_ = std::move(metadata);
}

std::vector<double> ForestPredictor::predict_rows(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    double sum = 0.0;
    for (const DecisionTree& tree : trees_) sum += tree.evaluate(rows.row(r));
    out[r] = sum * inv;
  }
  return out;
}

namespace {

struct SplitStats {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double y) {
    count += 1.0;
    sum += y;
    sum_sq += y * y;
  }
  void remove(double y) {
    count -= 1.0;
    sum -= y;
    sum_sq -= y * y;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const std::vector<double>& y, bool classification,
              const ForestOptions& options, std::size_t max_features, Rng& rng,
              std::vector<double>& importance)
      : data_(data),
        y_(y),
        classification_(classification),
        options_(options),
        max_features_(max_features),
        rng_(rng),
        importance_(importance) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    DecisionTree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, samples, 0);
    return tree;
  }

 private:
  double impurity(const SplitStats& s) const {
    if (s.count <= 0.0) return 0.0;
    const double mean = s.sum / s.count;
    if (classification_) return 2.0 * mean * (1.0 - mean);  // Gini, two classes
    return std::max(0.0, s.sum_sq / s.count - mean * mean);
  }

  void grow(DecisionTree& tree, std::size_t node, std::vector<std::size_t>& samples, int depth) {
    SplitStats parent;
    for (std::size_t s : samples) parent.add(y_[s]);
    tree.nodes[node].value = parent.sum / parent.count;

    const double parent_impurity = impurity(parent);
    const auto min_leaf = static_cast<std::size_t>(std::max(1, options_.min_leaf));
    if (depth >= options_.max_depth || parent_impurity <= 0.0 ||
        samples.size() < 2 * min_leaf) {
      return;
    }

    // Candidate features: partial Fisher-Yates over all p.
    std::vector<std::size_t> features(data_.n_features());
    std::iota(features.begin(), features.end(), std::size_t{0});
    const std::size_t n_candidates = std::min(max_features_, features.size());
    for (std::size_t i = 0; i < n_candidates; ++i) {
      std::swap(features[i], features[i + uniform_index(rng_, features.size() - i)]);
    }

    double best_gain = 1e-12;
    std::size_t best_feature = TreeNode::kLeaf;
    double best_threshold = 0.0;
    const double m = static_cast<double>(samples.size());
    std::vector<std::pair<double, double>> column(samples.size());

    for (std::size_t c = 0; c < n_candidates; ++c) {
      const std::size_t f = features[c];
      for (std::size_t i = 0; i < samples.size(); ++i) {
        column[i] = {data_.value(samples[i], f), y_[samples[i]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      SplitStats left;
      SplitStats right = parent;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left.add(column[i].second);
        right.remove(column[i].second);
        const std::size_t n_left = i + 1;
        if (column[i].first == column[i + 1].first) continue;
        if (n_left < min_leaf || column.size() - n_left < min_leaf) continue;
        const double gain =
            m * parent_impurity - left.count * impurity(left) - right.count * impurity(right);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          const double lo = column[i].first;
          const double hi = column[i + 1].first;
          best_threshold = lo + (hi - lo) / 2.0;
          if (best_threshold >= hi) best_threshold = lo;
        }
      }
    }
    if (best_feature == TreeNode::kLeaf) return;

    importance_[best_feature] += best_gain;

    std::vector<std::size_t> left_samples;
    std::vector<std::size_t> right_samples;
    for (std::size_t s : samples) {
      (data_.value(s, best_feature) <= best_threshold ? left_samples : right_samples).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    const std::size_t left_id = tree.nodes.size();
    tree.nodes.emplace_back();
    const std::size_t right_id = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes[node].feature = best_feature;
    tree.nodes[node].threshold = best_threshold;
    tree.nodes[node].left = left_id;
    tree.nodes[node].right = right_id;

    grow(tree, left_id, left_samples, depth + 1);
    grow(tree, right_id, right_samples, depth + 1);
  }

  const Dataset& data_;
  const std::vector<double>& y_;
  bool classification_;
  const ForestOptions& options_;
  std::size_t max_features_;
  Rng& rng_;
  std::vector<double>& importance_;
};

std::shared_ptr<ForestPredictor> grow_ensemble(const Dataset& dataset, const ForestOptions& options,
                                               PredictorKind kind) {
  const Target& target = dataset.require_target();
  if (options.n_trees < 1) throw InvalidArgument("forest needs at least one tree");
  if (options.max_depth < 0) throw InvalidArgument("max_depth must be non-negative");
  if (options.min_leaf < 1) throw InvalidArgument("min_leaf must be at least 1");

  const bool classification = std::all_of(target.values.begin(), target.values.end(),
                                          [](double v) { return v == 0.0 || v == 1.0; });
  const std::size_t p = dataset.n_features();
  const std::size_t max_features =
      options.max_features > 0
          ? std::min(options.max_features, p)
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));

  std::vector<double> importance(p, 0.0);
  std::vector<DecisionTree> trees;
  trees.reserve(static_cast<std::size_t>(options.n_trees));
  const std::size_t n = dataset.n_rows();
  for (int t = 0; t < options.n_trees; ++t) {
    Rng rng = make_rng(options.seed, {static_cast<std::uint64_t>(t)});
    std::vector<std::size_t> samples(n);
    if (options.bootstrap) {
      for (auto& s : samples) s = uniform_index(rng, n);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(dataset, target.values, classification, options, max_features, rng,
                        importance);
    trees.push_back(builder.build(std::move(samples)));
  }

  std::map<std::string, std::string> metadata{
      {"n_trees", std::to_string(options.n_trees)},
      {"max_depth", std::to_string(options.max_depth)},
      {"min_leaf", std::to_string(options.min_leaf)},
      {"max_features", std::to_string(max_features)},
      {"bootstrap", options.bootstrap ? "true" : "false"},
      {"seed", std::to_string(options.seed)},
      {"task", classification ? "classification" : "regression"},
      {"criterion", classification ? "gini" : "variance"},
  };
  return std::make_shared<ForestPredictor>(std::move(trees), p, classification,
                                           std::move(importance), kind, std::move(metadata));
}

}  // namespace

std::shared_ptr<ForestPredictor> fit_forest(const Dataset& dataset, const ForestOptions& options) {
  return grow_ensemble(dataset, options, PredictorKind::kBuiltinForest);
}

std::shared_ptr<ForestPredictor> fit_tree(const Dataset& dataset, int max_depth, int min_leaf,
                                          std::uint64_t seed) {
  ForestOptions options;
  options.n_trees = 1;
  options.max_depth = max_depth;
  options.min_leaf = min_leaf;
  options.seed = seed;
  options.bootstrap = false;
  options.max_features = dataset.n_features();
  return grow_ensemble(dataset, options, PredictorKind::kBuiltinTree);
}

}  // namespace iceimpact
