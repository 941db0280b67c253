#include <Eigen/Dense>

#include "iceimpact/error.hpp"
#include "iceimpact/predictors.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact {

namespace {

constexpr double kRidge = 1e-8;

}  // namespace

double FittedLinearModel::evaluate(std::span<const double> row) const {
  double y = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) y += coefficients[j] * row[j];
  return y;
}

FittedLinearModel fit_ols(const Dataset& dataset, const OlsOptions& options) {
  const Target& target = dataset.require_target();
  const auto n = static_cast<Eigen::Index>(dataset.n_rows());
  const auto p = static_cast<Eigen::Index>(dataset.n_features());

  if (n < p + 1 && !options.allow_ridge) {
    throw RankDeficiencyError("least squares needs at least " + std::to_string(p + 1) +
                              " rows for " + std::to_string(p) + " features plus intercept, got " +
                              std::to_string(n));
  }

  // Column 0 is the intercept.
  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      design(i, j + 1) = dataset.value(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    y(i) = target.values[static_cast<std::size_t>(i)];
  }

  Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd rhs = design.transpose() * y;

  bool ridge = false;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const double tol = Eigen::NumTraits<double>::epsilon() * static_cast<double>(p + 1);
  // Fewer rows than parameters is singular in exact arithmetic even when
  // rounding hides it from the condition estimate.
  if (n < p + 1 || ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < tol) {
    if (!options.allow_ridge) {
      throw RankDeficiencyError("Gram matrix is singular and ridge fallback is disabled");
    }
    gram.diagonal().array() += kRidge;
    ldlt.compute(gram);
    ridge = true;
  }
  const Eigen::VectorXd beta = ldlt.solve(rhs);

  FittedLinearModel model;
  model.intercept = beta(0);
  model.coefficients.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) model.coefficients[static_cast<std::size_t>(j)] = beta(j + 1);
  model.ridge_applied = ridge;
  return model;
}

LinearPredictor::LinearPredictor(FittedLinearModel model) : model_(std::move(model)) {
  metadata_["intercept"] = format_real(model_.intercept);
  metadata_["ridge_applied"] = model_.ridge_applied ? "true" : "false";
}

std::vector<double> LinearPredictor::predict_rows(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = model_.evaluate(rows.row(r));
  return out;
}

}  // namespace iceimpact
