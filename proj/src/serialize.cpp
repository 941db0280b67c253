#include "iceimpact/serialize.hpp"

#include <charconv>
#include <system_error>

namespace iceimpact {

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string format_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string idfi_label(double lambda) { return "idfi_" + format_shortest(lambda); }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json impacts_json(const Dataset& dataset, const std::vector<FeatureImpactResult>& impacts,
                  const Json& provenance) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "compute";
  out["provenance"] = provenance;
  Json features = Json::array();
  for (const auto& r : impacts) {
    const FeatureMeta& meta = dataset.feature(r.feature);
    Json f;
    f["name"] = meta.name;
    f["index"] = r.feature;
    f["kind"] = to_string(meta.kind);
    f["sigma"] = r.sigma;
    f["n_obs"] = r.n_obs;
    f["n_grid"] = r.n_grid;
    f["fi"] = r.fi;
    f["fi_directional"] = r.fi_directional;
    Json idfi = Json::object();
    for (const auto& [lambda, value] : r.idfi) idfi[format_shortest(lambda)] = value;
    f["idfi"] = idfi;
    f["he"] = r.heterogeneity;
    f["nl"] = r.non_linearity;
    features.push_back(std::move(f));
  }
  out["features"] = std::move(features);
  return out;
}

std::string impacts_csv(const Dataset& dataset, const std::vector<FeatureImpactResult>& impacts) {
  std::vector<double> lambdas;
  if (!impacts.empty()) {
    for (const auto& [lambda, value] : impacts.front().idfi) lambdas.push_back(lambda);
  }
  std::string out = "feature,kind,sigma,n_obs,n_grid,fi,fi_directional";
  for (double l : lambdas) out += "," + idfi_label(l);
  out += ",heterogeneity,non_linearity\n";
  for (const auto& r : impacts) {
    const FeatureMeta& meta = dataset.feature(r.feature);
    out += csv_field(meta.name) + "," + to_string(meta.kind) + "," + format_real(r.sigma) + "," +
           std::to_string(r.n_obs) + "," + std::to_string(r.n_grid) + "," + format_real(r.fi) + "," +
           format_real(r.fi_directional);
    for (double l : lambdas) out += "," + format_real(r.idfi.at(l));
    out += "," + format_real(r.heterogeneity) + "," + format_real(r.non_linearity) + "\n";
  }
  return out;
}

Json report_json(const ImpactReport& report, const Json& provenance) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "compare";
  out["provenance"] = provenance;
  out["features"] = report.features;
  out["metrics"] = report.metric_names;

  Json normalized = Json::object();
  Json raw = Json::object();
  for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
    normalized[report.metric_names[m]] = report.normalized[m].values;
    raw[report.metric_names[m]] = report.raw[m].values;
  }
  out["normalized"] = std::move(normalized);
  out["raw"] = std::move(raw);

  Json matrix = Json::array();
  for (const auto& row : report.correlation) {
    Json r = Json::array();
    for (const auto& v : row) r.push_back(optional_number(v));
    matrix.push_back(std::move(r));
  }
  out["correlation"] = {{"metrics", report.metric_names}, {"pearson", std::move(matrix)}};

  Json diffs = Json::array();
  for (const auto& table : report.differences) {
    auto rows = [](const std::vector<Difference>& ds) {
      Json a = Json::array();
      for (const auto& d : ds) {
        a.push_back({{"feature", d.feature},
                     {"reference", d.reference},
                     {"other", d.other},
                     {"difference", d.difference}});
      }
      return a;
    };
    diffs.push_back({{"reference", table.reference},
                     {"other", table.other},
                     {"top_positive", rows(table.top_positive)},
                     {"top_negative", rows(table.top_negative)}});
  }
  out["differences"] = std::move(diffs);
  out["notes"] = report.notes;
  return out;
}

std::string report_csv(const ImpactReport& report) {
  std::string out = "# metrics\nfeature";
  for (const auto& name : report.metric_names) out += "," + csv_field(name);
  for (const auto& name : report.metric_names) out += "," + csv_field(name + "_raw");
  out += "\n";
  for (std::size_t j = 0; j < report.features.size(); ++j) {
    out += csv_field(report.features[j]);
    for (const auto& v : report.normalized) out += "," + format_real(v.values[j]);
    for (const auto& v : report.raw) out += "," + format_real(v.values[j]);
    out += "\n";
  }

  out += "\n# correlations\nmetric";
  for (const auto& name : report.metric_names) out += "," + csv_field(name);
  out += "\n";
  for (std::size_t a = 0; a < report.correlation.size(); ++a) {
    out += csv_field(report.metric_names[a]);
    for (const auto& v : report.correlation[a]) out += "," + (v ? format_real(*v) : std::string());
    out += "\n";
  }

  out += "\n# differences\nreference,other,direction,rank,feature,reference_value,other_value,difference\n";
  for (const auto& table : report.differences) {
    auto emit = [&](const std::vector<Difference>& ds, const char* direction) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        out += csv_field(table.reference) + "," + csv_field(table.other) + "," + direction + "," +
               std::to_string(i + 1) + "," + csv_field(ds[i].feature) + "," +
               format_real(ds[i].reference) + "," + format_real(ds[i].other) + "," +
               format_real(ds[i].difference) + "\n";
      }
    };
    emit(table.top_positive, "positive");
    emit(table.top_negative, "negative");
  }
  return out;
}

Json curves_json(const CurveSet& curves, const Json& provenance) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "plot-data";
  out["provenance"] = provenance;
  out["feature"] = curves.feature;
  out["sigma"] = curves.sigma;
  out["centered"] = curves.centered;
  Json list = Json::array();
  for (const auto& c : curves.curves) {
    Json points = Json::array();
    for (const auto& p : c.points) {
      points.push_back({{"x", p.x}, {"y", p.y}, {"in_half_sigma", p.in_half_sigma}});
    }
    list.push_back({{"row_id", c.row_id}, {"real_value", c.real_value}, {"points", std::move(points)}});
  }
  out["curves"] = std::move(list);
  return out;
}

std::string curves_csv(const CurveSet& curves) {
  std::string out = "feature,row_id,grid_x,y_hat,in_half_sigma,centered\n";
  const std::string feature = csv_field(curves.feature);
  const char* centered = curves.centered ? "1" : "0";
  for (const auto& c : curves.curves) {
    for (const auto& p : c.points) {
      out += feature + "," + std::to_string(c.row_id) + "," + format_real(p.x) + "," +
             format_real(p.y) + "," + (p.in_half_sigma ? "1" : "0") + "," + centered + "\n";
    }
  }
  return out;
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

}  // namespace iceimpact
