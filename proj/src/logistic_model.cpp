#include <cmath>

#include "iceimpact/error.hpp"
#include "iceimpact/predictors.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticPredictor::LogisticPredictor(std::vector<double> means, std::vector<double> scales,
                                     double intercept, std::vector<double> coefficients,
                                     const LogisticOptions& options)
    : means_(std::move(means)),
      scales_(std::move(scales)),
      intercept_(intercept),
      coefficients_(std::move(coefficients)) {
  metadata_["epochs"] = std::to_string(options.epochs);
  metadata_["learning_rate"] = format_real(options.learning_rate);
  metadata_["seed"] = std::to_string(options.seed);
  metadata_["coefficient_space"] = "standardized";
  metadata_["intercept"] = format_real(intercept_);
}

std::vector<double> LogisticPredictor::predict_rows(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    double z = intercept_;
    for (std::size_t j = 0; j < coefficients_.size(); ++j) {
      z += coefficients_[j] * (rows(r, j) - means_[j]) / scales_[j];
    }
    out[r] = sigmoid(z);
  }
  return out;
}

std::shared_ptr<LogisticPredictor> fit_logistic(const Dataset& dataset,
                                                const LogisticOptions& options) {
  const Target& target = dataset.require_target();
  for (double v : target.values) {
    if (v != 0.0 && v != 1.0) {
      throw InvalidArgument("logistic regression needs a binary 0/1 target; found " +
                            format_real(v));
    }
  }
  if (options.epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (!(options.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");

  const std::size_t n = dataset.n_rows();
  const std::size_t p = dataset.n_features();
  std::vector<double> means(p);
  std::vector<double> scales(p);
  for (std::size_t j = 0; j < p; ++j) {
    const std::vector<double> col = dataset.column(j);
    means[j] = stats::mean(col);
    const double sd = dataset.feature(j).std_dev;
    scales[j] = sd > 0.0 ? sd : 1.0;
  }
  Matrix z(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z(i, j) = (dataset.value(i, j) - means[j]) / scales[j];
  }

  // Zero start and full-batch updates make the fit independent of the seed;
  // the seed is recorded for provenance only.
  double b = 0.0;
  std::vector<double> w(p, 0.0);
  std::vector<double> grad(p);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = b;
      for (std::size_t j = 0; j < p; ++j) s += w[j] * z(i, j);
      const double residual = sigmoid(s) - target.values[i];
      grad_b += residual;
      for (std::size_t j = 0; j < p; ++j) grad[j] += residual * z(i, j);
    }
    b -= options.learning_rate * grad_b * inv_n;
    for (std::size_t j = 0; j < p; ++j) w[j] -= options.learning_rate * grad[j] * inv_n;
  }
  return std::make_shared<LogisticPredictor>(std::move(means), std::move(scales), b, std::move(w),
                                             options);
}

}  // namespace iceimpact
