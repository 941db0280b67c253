#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/phantom.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact {

// Finite-difference slopes along every curve of a grid:
// slope(i, k) = (y[i][k+1] - y[i][k]) / (x[k+1] - x[k]) for k in [0, n_grid-1).
class SegmentDerivatives {
 public:
  explicit SegmentDerivatives(const PhantomGrid& grid);

  std::size_t n_obs() const { return n_obs_; }
  std::size_t n_segments() const { return n_segments_; }
  double slope(std::size_t obs, std::size_t segment) const {
    return slopes_[obs * n_segments_ + segment];
  }
  // Right-endpoint grid value of a segment.
  double segment_end(std::size_t segment) const { return grid_[segment + 1]; }
  double real_value(std::size_t obs) const { return real_values_[obs]; }

 private:
  std::size_t n_obs_;
  std::size_t n_segments_;
  std::vector<double> grid_;
  std::vector<double> real_values_;
  std::vector<double> slopes_;
};

struct FeatureImpactResult {
  std::size_t feature = 0;
  double sigma = 0.0;
  double fi = 0.0;
  double fi_directional = 0.0;
  std::map<double, double> idfi;  // keyed by lambda
  double heterogeneity = 0.0;
  double non_linearity = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_grid = 0;
};

// Weight of a phantom value: lambda^(|phantom - real| / sigma). Defined as 1
// when sigma is 0. Throws InvalidArgument unless 0 < lambda <= 1.
double likelihood(double real_value, double phantom_value, double sigma, double lambda);

// Throws InvalidArgument unless 0 < lambda <= 1.
void validate_lambda(double lambda);

// Mean absolute slope over all curves and segments, times sigma. Zero when
// the grid has a single value.
double feature_impact(const SegmentDerivatives& d, double sigma);
double feature_impact(const PhantomGrid& grid, double sigma);

// As feature_impact with signed slopes; the sign gives the average direction.
double feature_impact_directional(const SegmentDerivatives& d, double sigma);
double feature_impact_directional(const PhantomGrid& grid, double sigma);

// Likelihood-weighted mean absolute slope, times sigma. Each segment is
// weighted by the likelihood of its right endpoint relative to the curve's
// real value. lambda == 1 reproduces feature_impact bit for bit.
double in_distribution_impact(const SegmentDerivatives& d, double sigma, double lambda);
double in_distribution_impact(const PhantomGrid& grid, double sigma, double lambda);

// Sigma times the mean over segments of the across-observation sample SD
// of slopes.
double heterogeneity(const SegmentDerivatives& d, double sigma);
double heterogeneity(const PhantomGrid& grid, double sigma);

// Sigma times the mean over observations of the within-curve sample SD of
// slopes.
double non_linearity(const SegmentDerivatives& d, double sigma);
double non_linearity(const PhantomGrid& grid, double sigma);

// Every metric from one grid.
FeatureImpactResult analyze_grid(const PhantomGrid& grid, double sigma,
                                 const std::vector<double>& lambdas);

struct AnalysisOptions {
  GridOptions grid;
  // Restrict curves to these row ids; empty means every row.
  std::vector<std::int64_t> row_ids;
  // Worker threads for analyze_features. Non-concurrent predictors are
  // replicated per worker when possible, otherwise run on one thread.
  std::size_t jobs = 1;
};

FeatureImpactResult analyze_feature(const Dataset& dataset, const Predictor& predictor,
                                    std::size_t feature, const std::vector<double>& lambdas,
                                    const AnalysisOptions& options = {});

// Results are ordered as `features`, independent of scheduling.
std::vector<FeatureImpactResult> analyze_features(const Dataset& dataset,
                                                  const PredictorHandle& predictor,
                                                  const std::vector<std::size_t>& features,
                                                  const std::vector<double>& lambdas,
                                                  const AnalysisOptions& options = {});

}  // namespace iceimpact
