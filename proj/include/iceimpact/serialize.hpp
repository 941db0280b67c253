#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "iceimpact/comparison.hpp"
#include "iceimpact/dataset.hpp"
#include "iceimpact/impact.hpp"
#include "iceimpact/plotdata.hpp"

namespace iceimpact {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// 17 significant digits, printf("%.17g") style.
std::string format_real(double value);
// Shortest text that round-trips, used for labels such as "0.75".
std::string format_shortest(double value);

// Column label for an in-distribution impact value, e.g. "idfi_0.75".
std::string idfi_label(double lambda);

// compute: one entry per analysed feature.
Json impacts_json(const Dataset& dataset, const std::vector<FeatureImpactResult>& impacts,
                  const Json& provenance);
// Header: feature,kind,sigma,n_obs,n_grid,fi,fi_directional,idfi_<l>...,heterogeneity,non_linearity
std::string impacts_csv(const Dataset& dataset, const std::vector<FeatureImpactResult>& impacts);

// compare: metric table, correlation matrix and difference tables.
Json report_json(const ImpactReport& report, const Json& provenance);
// Three CSV sections introduced by "# metrics", "# correlations" and
// "# differences" lines, separated by blank lines.
std::string report_csv(const ImpactReport& report);

// plot-data
Json curves_json(const CurveSet& curves, const Json& provenance);
// Header exactly: feature,row_id,grid_x,y_hat,in_half_sigma,centered
std::string curves_csv(const CurveSet& curves);

// JSON text as written by the CLI (two-space indent, trailing newline).
std::string dump(const Json& json);

}  // namespace iceimpact
