#include "iceimpact/phantom.hpp"

#include <algorithm>
#include <exception>

#include "iceimpact/error.hpp"

namespace iceimpact {

PhantomGrid build_grid(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                       const std::vector<std::int64_t>& row_ids, const GridOptions& options) {
  const FeatureMeta& meta = dataset.feature(feature);
  if (row_ids.empty()) throw InvalidArgument("phantom grid needs at least one observation");

  PhantomGrid grid;
  grid.feature = feature;
  grid.grid_values = meta.unique_values;
  const std::size_t m = grid.grid_values.size();
  const std::size_t p = dataset.n_features();

  std::vector<std::size_t> positions;
  positions.reserve(row_ids.size());
  for (std::int64_t id : row_ids) positions.push_back(dataset.index_of(id));

  grid.curves.resize(positions.size());
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk_observations);
  for (std::size_t begin = 0; begin < positions.size(); begin += chunk) {
    const std::size_t end = std::min(positions.size(), begin + chunk);
    Matrix phantoms((end - begin) * m, p);
    for (std::size_t obs = begin; obs < end; ++obs) {
      const auto source = dataset.row(positions[obs]);
      for (std::size_t k = 0; k < m; ++k) {
        auto dest = phantoms.row((obs - begin) * m + k);
        std::copy(source.begin(), source.end(), dest.begin());
        dest[feature] = grid.grid_values[k];
      }
    }

    std::vector<double> predictions;
    try {
      predictions = predictor.predict(phantoms);
    } catch (const std::exception& e) {
      std::throw_with_nested(FeatureError(feature, e.what()));
    }

    for (std::size_t obs = begin; obs < end; ++obs) {
      Curve& curve = grid.curves[obs];
      curve.row_id = row_ids[obs];
      curve.real_value = dataset.value(positions[obs], feature);
      const auto first = predictions.begin() + static_cast<std::ptrdiff_t>((obs - begin) * m);
      curve.predictions.assign(first, first + static_cast<std::ptrdiff_t>(m));
    }
  }
  return grid;
}

PhantomGrid build_grid(const Dataset& dataset, const Predictor& predictor, std::size_t feature,
                       const GridOptions& options) {
  return build_grid(dataset, predictor, feature, dataset.row_ids(), options);
}

}  // namespace iceimpact
