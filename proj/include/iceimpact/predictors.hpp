#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/matrix.hpp"

namespace iceimpact {

enum class PredictorKind {
  kBuiltinOls,
  kBuiltinLogistic,
  kBuiltinTree,
  kBuiltinForest,
  kExternal,
  // In-process callable supplied by a library user.
  kCallable,
};

enum class OutputKind { kRegressionScore, kProbability };

std::string to_string(PredictorKind kind);
std::string to_string(OutputKind kind);

// Batch prediction contract. predict() on k rows returns k finite reals and
// is a pure function of its input: equal inputs give bit-identical outputs
// regardless of batch composition.
class Predictor {
 public:
  virtual ~Predictor() = default;

  // Throws DimensionMismatchError when rows.cols() differs from the width
  // the predictor expects. A 0-row matrix yields an empty vector.
  std::vector<double> predict(const Matrix& rows) const;

  virtual PredictorKind kind() const = 0;
  virtual OutputKind output_kind() const = 0;
  // Expected column count, or 0 when the predictor accepts any width.
  virtual std::size_t n_features() const = 0;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // True when predict() may be called from several threads at once.
  virtual bool concurrent() const { return true; }
  // An independent predictor with identical behaviour for use by another
  // worker, or nullptr when the predictor cannot be replicated.
  virtual std::shared_ptr<Predictor> replicate() const { return nullptr; }
  // Releases external resources and reports deferred failures (for example a
  // child process exiting with an error). No-op for in-process models.
  virtual void finish() {}

 protected:
  virtual std::vector<double> predict_rows(const Matrix& rows) const = 0;
  std::map<std::string, std::string> metadata_;
};

using PredictorHandle = std::shared_ptr<Predictor>;

// --- linear ------------------------------------------------------------------

struct FittedLinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;
  bool ridge_applied = false;

  double evaluate(std::span<const double> row) const;
};

struct OlsOptions {
  // Add 1e-8 * I to a singular Gram matrix instead of failing.
  bool allow_ridge = true;
};

// Least squares through the normal equations, intercept included.
FittedLinearModel fit_ols(const Dataset& dataset, const OlsOptions& options = {});

class LinearPredictor final : public Predictor {
 public:
  explicit LinearPredictor(FittedLinearModel model);

  PredictorKind kind() const override { return PredictorKind::kBuiltinOls; }
  OutputKind output_kind() const override { return OutputKind::kRegressionScore; }
  std::size_t n_features() const override { return model_.coefficients.size(); }
  const FittedLinearModel& model() const { return model_; }

 protected:
  std::vector<double> predict_rows(const Matrix& rows) const override;

 private:
  FittedLinearModel model_;
};

// --- logistic ----------------------------------------------------------------

struct LogisticOptions {
  int epochs = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

// Logistic regression fitted by full-batch gradient descent on standardized
// features. Coefficients live in standardized space.
class LogisticPredictor final : public Predictor {
 public:
  LogisticPredictor(std::vector<double> means, std::vector<double> scales, double intercept,
                    std::vector<double> coefficients, const LogisticOptions& options);

  PredictorKind kind() const override { return PredictorKind::kBuiltinLogistic; }
  OutputKind output_kind() const override { return OutputKind::kProbability; }
  std::size_t n_features() const override { return coefficients_.size(); }

  double intercept() const { return intercept_; }
  const std::vector<double>& standardized_coefficients() const { return coefficients_; }

 protected:
  std::vector<double> predict_rows(const Matrix& rows) const override;

 private:
  std::vector<double> means_;
  std::vector<double> scales_;
  double intercept_;
  std::vector<double> coefficients_;
};

std::shared_ptr<LogisticPredictor> fit_logistic(const Dataset& dataset,
                                                const LogisticOptions& options = {});

double sigmoid(double z);

// --- trees -------------------------------------------------------------------

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 2;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  // Candidate features per split; 0 selects max(1, floor(sqrt(p))).
  std::size_t max_features = 0;
};

struct TreeNode {
  // Leaves have feature == kLeaf.
  static constexpr std::size_t kLeaf = static_cast<std::size_t>(-1);
  std::size_t feature = kLeaf;
  double threshold = 0.0;  // go left when value <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;  // leaf mean (class-1 frequency for classification)
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double evaluate(std::span<const double> row) const;
};

// Bagged CART ensemble. Classification (target values in {0,1}) grows trees
// with Gini impurity and predicts the mean leaf class-1 frequency;
// otherwise trees minimise variance and predict the mean leaf value.
class ForestPredictor final : public Predictor {
 public:
  ForestPredictor(std::vector<DecisionTree> trees, std::size_t n_features, bool classification,
                  std::vector<double> impurity_decrease, PredictorKind kind,
                  std::map<std::string, std::string> metadata);

  PredictorKind kind() const override { return kind_; }
  OutputKind output_kind() const override {
    return classification_ ? OutputKind::kProbability : OutputKind::kRegressionScore;
  }
  std::size_t n_features() const override { return n_features_; }

  bool classification() const { return classification_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  // Total weighted impurity decrease per feature, summed over all splits.
  const std::vector<double>& impurity_decrease() const { return impurity_decrease_; }

 protected:
  std::vector<double> predict_rows(const Matrix& rows) const override;

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_features_;
  bool classification_;
  std::vector<double> impurity_decrease_;
  PredictorKind kind_;
};

std::shared_ptr<ForestPredictor> fit_forest(const Dataset& dataset, const ForestOptions& options = {});

// One unbagged tree over all features (kind builtin-tree).
std::shared_ptr<ForestPredictor> fit_tree(const Dataset& dataset, int max_depth, int min_leaf,
                                          std::uint64_t seed = 0);

// --- callable ----------------------------------------------------------------

// Wraps a row function. Used for hand-built models and test fixtures.
class CallablePredictor final : public Predictor {
 public:
  using RowFunction = std::function<double(std::span<const double>)>;

  CallablePredictor(RowFunction fn, std::size_t n_features,
                    OutputKind output = OutputKind::kRegressionScore, std::string name = "callable");

  PredictorKind kind() const override { return PredictorKind::kCallable; }
  OutputKind output_kind() const override { return output_; }
  std::size_t n_features() const override { return n_features_; }

 protected:
  std::vector<double> predict_rows(const Matrix& rows) const override;

 private:
  RowFunction fn_;
  std::size_t n_features_;
  OutputKind output_;
};

PredictorHandle make_callable(CallablePredictor::RowFunction fn, std::size_t n_features,
                              OutputKind output = OutputKind::kRegressionScore);

// --- external ----------------------------------------------------------------

struct ExternalOptions {
  std::chrono::milliseconds timeout{60'000};  // per batch
  OutputKind output = OutputKind::kRegressionScore;
  std::size_t n_features = 0;  // 0: accept the width of the first batch
};

// Child process speaking the line-based batch protocol:
//   engine -> child: "BATCH <k> <p>\n" then k CSV rows of p reals
//   child -> engine: k lines, one real each
// Batches are serialised through the single child; closing stdin ends the
// session.
class ExternalPredictor final : public Predictor {
 public:
  ExternalPredictor(std::vector<std::string> argv, const ExternalOptions& options);
  ~ExternalPredictor() override;

  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  PredictorKind kind() const override { return PredictorKind::kExternal; }
  OutputKind output_kind() const override { return options_.output; }
  std::size_t n_features() const override { return options_.n_features; }
  bool concurrent() const override { return false; }
  std::shared_ptr<Predictor> replicate() const override;

  // Closes the child's stdin and waits for it. Throws ChildProcessError on a
  // nonzero exit status. Idempotent.
  void finish() override;
  std::size_t batches_sent() const;

 protected:
  std::vector<double> predict_rows(const Matrix& rows) const override;

 private:
  struct Process;

  std::vector<std::string> argv_;
  ExternalOptions options_;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Process> process_;
  mutable std::size_t batch_index_ = 0;
  mutable std::size_t width_ = 0;
};

std::shared_ptr<ExternalPredictor> external_predictor(std::vector<std::string> argv,
                                                      const ExternalOptions& options = {});

}  // namespace iceimpact
