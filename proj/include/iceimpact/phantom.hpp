#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact {

// One observation's sweep over the at-issue feature.
struct Curve {
  std::int64_t row_id = 0;
  double real_value = 0.0;           // the observation's own feature value
  std::vector<double> predictions;   // one per grid value, ascending x
};

struct PhantomGrid {
  std::size_t feature = 0;
  std::vector<double> grid_values;   // strictly increasing
  std::vector<Curve> curves;

  std::size_t n_obs() const { return curves.size(); }
  std::size_t n_grid() const { return grid_values.size(); }
};

struct GridOptions {
  std::size_t chunk_observations = 256;  // observations per prediction batch
};

// Replicates every selected row once per unique value of `feature`, replaces
// the feature with that value and collects predictions into per-row curves.
// The dataset is not modified. Predictor failures are rethrown as a
// FeatureError with the original exception nested.
PhantomGrid build_grid(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                       const std::vector<std::int64_t>& row_ids, const GridOptions& options = {});

// Same, over every row of the dataset.
PhantomGrid build_grid(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                       const GridOptions& options = {});

}  // namespace iceimpact
