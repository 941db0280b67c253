#include "iceimpact/impact.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "iceimpact/error.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact {

SegmentDerivatives::SegmentDerivatives(const PhantomGrid& grid)
    : n_obs_(grid.n_obs()),
      n_segments_(grid.n_grid() > 0 ? grid.n_grid() - 1 : 0),
      grid_(grid.grid_values) {
  real_values_.reserve(n_obs_);
  slopes_.reserve(n_obs_ * n_segments_);
  for (const Curve& curve : grid.curves) {
    real_values_.push_back(curve.real_value);
    for (std::size_t k = 0; k < n_segments_; ++k) {
      const double run = grid_[k + 1] - grid_[k];
      slopes_.push_back((curve.predictions[k + 1] - curve.predictions[k]) / run);
    }
  }
}

void validate_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("lambda must lie in (0, 1], got " + format_real(lambda));
  }
}

double likelihood(double real_value, double phantom_value, double sigma, double lambda) {
  validate_lambda(lambda);
  if (sigma == 0.0) return 1.0;
  return std::pow(lambda, std::abs(phantom_value - real_value) / sigma);
}

namespace {

bool degenerate(const SegmentDerivatives& d) { return d.n_segments() == 0 || d.n_obs() == 0; }

}  // namespace

double feature_impact(const SegmentDerivatives& d, double sigma) {
  if (degenerate(d)) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < d.n_obs(); ++i) {
    for (std::size_t k = 0; k < d.n_segments(); ++k) sum += std::abs(d.slope(i, k));
  }
  return sigma * (sum / static_cast<double>(d.n_obs() * d.n_segments()));
}

double feature_impact_directional(const SegmentDerivatives& d, double sigma) {
  if (degenerate(d)) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < d.n_obs(); ++i) {
    for (std::size_t k = 0; k < d.n_segments(); ++k) sum += d.slope(i, k);
  }
  return sigma * (sum / static_cast<double>(d.n_obs() * d.n_segments()));
}

double in_distribution_impact(const SegmentDerivatives& d, double sigma, double lambda) {
  validate_lambda(lambda);
  if (degenerate(d)) return 0.0;
  // Same summation order as feature_impact; with lambda == 1 every weight is
  // exactly 1, so both sums and the result match it bit for bit.
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < d.n_obs(); ++i) {
    for (std::size_t k = 0; k < d.n_segments(); ++k) {
      const double w = likelihood(d.real_value(i), d.segment_end(k), sigma, lambda);
      weighted += w * std::abs(d.slope(i, k));
      total += w;
    }
  }
  return sigma * (weighted / total);
}

double heterogeneity(const SegmentDerivatives& d, double sigma) {
  if (degenerate(d) || d.n_obs() < 2) return 0.0;
  std::vector<double> column(d.n_obs());
  double sum = 0.0;
  for (std::size_t k = 0; k < d.n_segments(); ++k) {
    for (std::size_t i = 0; i < d.n_obs(); ++i) column[i] = d.slope(i, k);
    sum += stats::sample_sd(column);
  }
  return sigma * (sum / static_cast<double>(d.n_segments()));
}

double non_linearity(const SegmentDerivatives& d, double sigma) {
  if (degenerate(d) || d.n_segments() < 2) return 0.0;
  std::vector<double> row(d.n_segments());
  double sum = 0.0;
  for (std::size_t i = 0; i < d.n_obs(); ++i) {
    for (std::size_t k = 0; k < d.n_segments(); ++k) row[k] = d.slope(i, k);
    sum += stats::sample_sd(row);
  }
  return sigma * (sum / static_cast<double>(d.n_obs()));
}

double feature_impact(const PhantomGrid& grid, double sigma) {
  return feature_impact(SegmentDerivatives(grid), sigma);
}
double feature_impact_directional(const PhantomGrid& grid, double sigma) {
  return feature_impact_directional(SegmentDerivatives(grid), sigma);
}
double in_distribution_impact(const PhantomGrid& grid, double sigma, double lambda) {
  return in_distribution_impact(SegmentDerivatives(grid), sigma, lambda);
}
double heterogeneity(const PhantomGrid& grid, double sigma) {
  return heterogeneity(SegmentDerivatives(grid), sigma);
}
double non_linearity(const PhantomGrid& grid, double sigma) {
  return non_linearity(SegmentDerivatives(grid), sigma);
}

FeatureImpactResult analyze_grid(const PhantomGrid& grid, double sigma,
                                 const std::vector<double>& lambdas) {
  for (double lambda : lambdas) validate_lambda(lambda);
  const SegmentDerivatives d(grid);
  FeatureImpactResult result;
  result.feature = grid.feature;
  result.sigma = sigma;
  result.n_obs = grid.n_obs();
  result.n_grid = grid.n_grid();
  result.fi = feature_impact(d, sigma);
  result.fi_directional = feature_impact_directional(d, sigma);
  for (double lambda : lambdas) result.idfi[lambda] = in_distribution_impact(d, sigma, lambda);
  result.heterogeneity = heterogeneity(d, sigma);
  result.non_linearity = non_linearity(d, sigma);
  return result;
}

FeatureImpactResult analyze_feature(const Dataset& dataset, const Predictor& predictor,
                                    std::size_t feature, const std::vector<double>& lambdas,
                                    const AnalysisOptions& options) {
  for (double lambda : lambdas) validate_lambda(lambda);
  const PhantomGrid grid =
      options.row_ids.empty() ? build_grid(dataset, predictor, feature, options.grid)
                              : build_grid(dataset, predictor, feature, options.row_ids, options.grid);
  return analyze_grid(grid, dataset.feature(feature).std_dev, lambdas);
}

std::vector<FeatureImpactResult> analyze_features(const Dataset& dataset,
                                                  const PredictorHandle& predictor,
                                                  const std::vector<std::size_t>& features,
                                                  const std::vector<double>& lambdas,
                                                  const AnalysisOptions& options) {
  for (double lambda : lambdas) validate_lambda(lambda);
  for (std::size_t f : features) dataset.feature(f);

  std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, features.size()));
  std::vector<PredictorHandle> workers{predictor};
  if (!predictor->concurrent()) {
    for (std::size_t w = 1; w < jobs; ++w) {
      PredictorHandle replica = predictor->replicate();
      if (!replica) break;
      workers.push_back(std::move(replica));
    }
  } else {
    workers.resize(jobs, predictor);
  }
  jobs = workers.size();

  std::vector<FeatureImpactResult> results(features.size());
  std::vector<std::exception_ptr> errors(features.size());
  std::atomic<std::size_t> next{0};
  auto work = [&](const Predictor& model) {
    for (std::size_t slot; (slot = next.fetch_add(1)) < features.size();) {
      try {
        results[slot] = analyze_feature(dataset, model, features[slot], lambdas, options);
      } catch (...) {
        errors[slot] = std::current_exception();
      }
    }
  };

  if (jobs == 1) {
    work(*workers.front());
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) threads.emplace_back(work, std::cref(*workers[w]));
    for (auto& t : threads) t.join();
  }

  std::exception_ptr replica_error;
  for (std::size_t w = 1; w < workers.size(); ++w) {
    if (workers[w] == predictor) continue;
    try {
      workers[w]->finish();
    } catch (...) {
      if (!replica_error) replica_error = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (replica_error) std::rethrow_exception(replica_error);
  return results;
}

}  // namespace iceimpact
