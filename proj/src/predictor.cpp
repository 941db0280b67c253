#include <cmath>

#include "iceimpact/error.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact {

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kBuiltinOls:
      return "builtin-ols";
    case PredictorKind::kBuiltinLogistic:
      return "builtin-logistic";
    case PredictorKind::kBuiltinTree:
      return "builtin-tree";
    case PredictorKind::kBuiltinForest:
      return "builtin-forest";
    case PredictorKind::kExternal:
      return "external";
    case PredictorKind::kCallable:
      return "callable";
  }
  return "unknown";
}

std::string to_string(OutputKind kind) {
  return kind == OutputKind::kProbability ? "probability" : "regression-score";
}

std::vector<double> Predictor::predict(const Matrix& rows) const {
  const std::size_t width = n_features();
  if (width != 0 && rows.cols() != width) {
    throw DimensionMismatchError("predictor expects " + std::to_string(width) +
                                 " columns, got " + std::to_string(rows.cols()));
  }
  if (rows.rows() == 0) return {};
  std::vector<double> out = predict_rows(rows);
  if (out.size() != rows.rows()) {
    throw PredictorError("predictor returned " + std::to_string(out.size()) +
                         " values for " + std::to_string(rows.rows()) + " rows");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw PredictorError("non-finite prediction for row " + std::to_string(i));
    }
    if (output_kind() == OutputKind::kProbability && (out[i] < 0.0 || out[i] > 1.0)) {
      throw PredictorError("probability output outside [0, 1] for row " + std::to_string(i));
    }
  }
  return out;
}

CallablePredictor::CallablePredictor(RowFunction fn, std::size_t n_features, OutputKind output,
                                     std::string name)
    : fn_(std::move(fn)), n_features_(n_features), output_(output) {
  metadata_["name"] = std::move(name);
}

std::vector<double> CallablePredictor::predict_rows(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = fn_(rows.row(r));
  return out;
}

PredictorHandle make_callable(CallablePredictor::RowFunction fn, std::size_t n_features,
                              OutputKind output) {
  return std::make_shared<CallablePredictor>(std::move(fn), n_features, output);
}

}  // namespace iceimpact
