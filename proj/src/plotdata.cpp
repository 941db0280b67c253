#include "iceimpact/plotdata.hpp"

#include <cmath>

namespace iceimpact {

CurveSet curves_from_grid(const PhantomGrid& grid, const std::string& feature_name, double sigma,
                          bool centered) {
  CurveSet set;
  set.feature = feature_name;
  set.sigma = sigma;
  set.centered = centered;
  set.curves.reserve(grid.n_obs());
  for (const Curve& curve : grid.curves) {
    PlotCurve out;
    out.row_id = curve.row_id;
    out.real_value = curve.real_value;
    const double offset = centered && !curve.predictions.empty() ? curve.predictions.front() : 0.0;
    out.points.reserve(grid.n_grid());
    for (std::size_t k = 0; k < grid.n_grid(); ++k) {
      const double x = grid.grid_values[k];
      out.points.push_back({x, curve.predictions[k] - offset,
                            std::abs(x - curve.real_value) <= sigma / 2.0});
    }
    set.curves.push_back(std::move(out));
  }
  return set;
}

namespace {

CurveSet build(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
               const SamplingConfig& sampling, const GridOptions& options, bool centered) {
  const std::vector<std::int64_t> rows =
      sampling.enabled
          ? sample_rows(dataset, feature, sampling.per_quantile, sampling.quantiles, sampling.seed)
          : dataset.row_ids();
  const PhantomGrid grid = build_grid(dataset, predictor, feature, rows, options);
  const FeatureMeta& meta = dataset.feature(feature);
  return curves_from_grid(grid, meta.name, meta.std_dev, centered);
}

}  // namespace

CurveSet ice_curves(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                    const SamplingConfig& sampling, const GridOptions& grid) {
  return build(dataset, predictor, feature, sampling, grid, false);
}

CurveSet c_ice_curves(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                      const SamplingConfig& sampling, const GridOptions& grid) {
  return build(dataset, predictor, feature, sampling, grid, true);
}

}  // namespace iceimpact
