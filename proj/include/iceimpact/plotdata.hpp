#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/phantom.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  bool in_half_sigma = false;  // |x - real_value| <= sigma / 2
};

struct PlotCurve {
  std::int64_t row_id = 0;
  double real_value = 0.0;
  std::vector<CurvePoint> points;
};

struct CurveSet {
  std::string feature;
  double sigma = 0.0;
  bool centered = false;
  std::vector<PlotCurve> curves;
};

struct SamplingConfig {
  bool enabled = true;
  std::size_t per_quantile = 10;
  std::size_t quantiles = 10;
  std::uint64_t seed = 0;
};

// Curves from an existing grid. Centered curves are shifted so the point at
// the smallest grid value sits at y = 0.
CurveSet curves_from_grid(const PhantomGrid& grid, const std::string& feature_name, double sigma,
                          bool centered);

CurveSet ice_curves(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                    const SamplingConfig& sampling = {}, const GridOptions& grid = {});

CurveSet c_ice_curves(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                      const SamplingConfig& sampling = {}, const GridOptions& grid = {});

}  // namespace iceimpact
