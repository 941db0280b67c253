#include "iceimpact/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <system_error>

#include "iceimpact/error.hpp"
#include "iceimpact/random.hpp"
#include "iceimpact/serialize.hpp"

namespace iceimpact {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous:
      return "continuous";
    case FeatureKind::kCategoricalOrdinal:
      return "categorical-ordinal";
    case FeatureKind::kBinary:
      return "binary";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "continuous") return FeatureKind::kContinuous;
  if (text == "categorical-ordinal" || text == "categorical") {
    return FeatureKind::kCategoricalOrdinal;
  }
  if (text == "binary") return FeatureKind::kBinary;
  throw InvalidArgument("unknown feature kind '" + text + "'");
}

namespace stats {

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  if (std::all_of(values.begin(), values.end(),
                  [&](double v) { return v == values.front(); })) {
    return 0.0;
  }
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace stats

namespace {

bool is_integral(double v) { return std::floor(v) == v; }

FeatureKind infer_kind(const std::vector<double>& unique_values, std::size_t n) {
  if (unique_values.size() == 2 && unique_values[0] == 0.0 && unique_values[1] == 1.0) {
    return FeatureKind::kBinary;
  }
  const double limit = std::max(10.0, std::sqrt(static_cast<double>(n)));
  if (static_cast<double>(unique_values.size()) <= limit &&
      std::all_of(unique_values.begin(), unique_values.end(), is_integral)) {
    return FeatureKind::kCategoricalOrdinal;
  }
  return FeatureKind::kContinuous;
}

std::vector<double> sorted_unique(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

}  // namespace

Dataset Dataset::from_matrix(std::vector<std::string> names, Matrix rows,
                             std::optional<Target> target,
                             std::vector<std::int64_t> row_ids,
                             std::vector<std::size_t> missing_counts) {
  if (rows.rows() == 0) throw DataError("dataset has no rows");
  if (rows.cols() == 0) throw DataError("dataset has no features");
  if (names.size() != rows.cols()) {
    throw DataError("feature name count does not match column count");
  }
  if (target && target->values.size() != rows.rows()) {
    throw DataError("target length does not match row count");
  }
  if (row_ids.empty()) {
    row_ids.resize(rows.rows());
    std::iota(row_ids.begin(), row_ids.end(), std::int64_t{0});
  }
  if (row_ids.size() != rows.rows()) throw DataError("row id count does not match row count");
  if (!std::is_sorted(row_ids.begin(), row_ids.end()) ||
      std::adjacent_find(row_ids.begin(), row_ids.end()) != row_ids.end()) {
    throw DataError("row ids must be strictly increasing");
  }
  if (!missing_counts.empty() && missing_counts.size() != rows.cols()) {
    throw DataError("missing count list does not match column count");
  }
  for (double v : rows.data()) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite value");
  }

  Dataset ds;
  ds.features_.reserve(rows.cols());
  for (std::size_t j = 0; j < rows.cols(); ++j) {
    const std::vector<double> col = rows.column(j);
    FeatureMeta meta;
    meta.name = std::move(names[j]);
    meta.unique_values = sorted_unique(col);
    meta.std_dev = meta.unique_values.size() == 1 ? 0.0 : stats::sample_sd(col);
    meta.kind = infer_kind(meta.unique_values, rows.rows());
    meta.missing_count = missing_counts.empty() ? 0 : missing_counts[j];
    ds.features_.push_back(std::move(meta));
  }
  ds.rows_ = std::move(rows);
  ds.target_ = std::move(target);
  ds.row_ids_ = std::move(row_ids);
  return ds;
}

const FeatureMeta& Dataset::feature(std::size_t index) const {
  if (index >= features_.size()) {
    throw InvalidArgument("feature index " + std::to_string(index) + " out of range");
  }
  return features_[index];
}

std::size_t Dataset::feature_index(const std::string& name) const {
  for (std::size_t j = 0; j < features_.size(); ++j) {
    if (features_[j].name == name) return j;
  }
  throw InvalidArgument("unknown feature '" + name + "'");
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  names.reserve(features_.size());
  for (const auto& f : features_) names.push_back(f.name);
  return names;
}

const Target& Dataset::require_target() const {
  if (!target_) throw InvalidArgument("dataset has no target column");
  return *target_;
}

std::size_t Dataset::index_of(std::int64_t row_id) const {
  auto it = std::lower_bound(row_ids_.begin(), row_ids_.end(), row_id);
  if (it == row_ids_.end() || *it != row_id) {
    throw InvalidArgument("unknown row id " + std::to_string(row_id));
  }
  return static_cast<std::size_t>(it - row_ids_.begin());
}

Dataset Dataset::with_kinds(const std::map<std::string, FeatureKind>& kinds) const {
  Dataset copy = *this;
  for (const auto& [name, kind] : kinds) {
    FeatureMeta& meta = copy.features_[feature_index(name)];
    if (kind == FeatureKind::kBinary) {
      for (double v : meta.unique_values) {
        if (v != 0.0 && v != 1.0) {
          throw InvalidArgument("feature '" + name + "' cannot be binary: value " +
                                format_real(v) + " is not 0 or 1");
        }
      }
    }
    meta.kind = kind;
  }
  return copy;
}

// --- CSV ------------------------------------------------------------------

namespace {

// Splits RFC-4180 text into records. Quoted fields may contain commas,
// doubled quotes and line breaks. Each record carries its starting line.
struct Record {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<Record> split_records(const std::string& text) {
  std::vector<Record> records;
  std::size_t pos = 0;
  std::size_t line = 1;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) pos = 3;

  while (pos < text.size()) {
    Record rec{line, {}};
    std::string field;
    bool in_quotes = false;
    bool end_of_record = false;
    while (pos < text.size() && !end_of_record) {
      const char c = text[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < text.size() && text[pos + 1] == '"') {
            field.push_back('"');
            pos += 2;
            continue;
          }
          in_quotes = false;
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        ++pos;
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          ++pos;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          ++pos;
          break;
        case '\r':
          ++pos;
          break;
        case '\n':
          ++line;
          ++pos;
          end_of_record = true;
          break;
        default:
          field.push_back(c);
          ++pos;
      }
    }
    if (in_quotes) throw ParseError(rec.line, 0, "unterminated quoted field");
    rec.fields.push_back(std::move(field));
    // Blank lines carry no record.
    if (!(rec.fields.size() == 1 && rec.fields[0].empty())) records.push_back(std::move(rec));
  }
  return records;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& cell) {
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  const std::vector<Record> records = split_records(text);
  if (records.empty()) throw DataError("CSV has no header row");

  std::vector<std::string> header;
  for (const auto& h : records.front().fields) header.push_back(trim(h));

  std::optional<std::size_t> target_col;
  if (options.target) {
    auto it = std::find(header.begin(), header.end(), *options.target);
    if (it == header.end()) {
      throw DataError("target column '" + *options.target + "' not found in header");
    }
    target_col = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t n_cols = header.size();

  // nullopt marks a missing cell.
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::int64_t> ids;
  std::size_t dropped_for_target = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.fields.size() != n_cols) {
      throw ParseError(rec.line, rec.fields.size(),
                       "line " + std::to_string(rec.line) + ": expected " +
                           std::to_string(n_cols) + " fields, found " +
                           std::to_string(rec.fields.size()));
    }
    std::vector<std::optional<double>> parsed(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string cell = trim(rec.fields[c]);
      if (cell.empty() || cell == options.missing_marker) continue;
      parsed[c] = parse_number(cell);
      if (!parsed[c]) {
        throw ParseError(rec.line, c + 1,
                         "line " + std::to_string(rec.line) + ", column " +
                             std::to_string(c + 1) + " ('" + header[c] +
                             "'): cannot parse '" + cell + "' as a number");
      }
    }
    if (target_col && !parsed[*target_col]) {
      ++dropped_for_target;
      continue;
    }
    cells.push_back(std::move(parsed));
    ids.push_back(static_cast<std::int64_t>(r - 1));
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < n_cols; ++c) {
    if (!target_col || c != *target_col) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw DataError("CSV has no feature columns");

  std::vector<std::size_t> missing(feature_cols.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      if (!row[feature_cols[j]]) ++missing[j];
    }
  }

  if (options.impute == ImputePolicy::kDropRow) {
    std::vector<std::vector<std::optional<double>>> kept;
    std::vector<std::int64_t> kept_ids;
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const bool complete = std::all_of(feature_cols.begin(), feature_cols.end(),
                                        [&](std::size_t c) { return cells[r][c].has_value(); });
      if (complete) {
        kept.push_back(std::move(cells[r]));
        kept_ids.push_back(ids[r]);
      }
    }
    cells = std::move(kept);
    ids = std::move(kept_ids);
  } else {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      if (missing[j] == 0) continue;
      const std::size_t c = feature_cols[j];
      std::vector<double> present;
      for (const auto& row : cells) {
        if (row[c]) present.push_back(*row[c]);
      }
      if (present.empty()) {
        throw DataError("column '" + header[c] + "' has no non-missing values to impute from");
      }
      const double m = stats::mean(present);
      for (auto& row : cells) {
        if (!row[c]) row[c] = m;
      }
    }
  }
  if (cells.empty()) {
    throw DataError(dropped_for_target > 0 || options.impute == ImputePolicy::kDropRow
                        ? "dataset is empty after dropping rows with missing values"
                        : "dataset has no data rows");
  }

  Matrix matrix(cells.size(), feature_cols.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      matrix(r, j) = *cells[r][feature_cols[j]];
    }
  }
  std::vector<std::string> names;
  for (std::size_t c : feature_cols) names.push_back(header[c]);

  std::optional<Target> target;
  if (target_col) {
    Target t{header[*target_col], {}};
    t.values.reserve(cells.size());
    for (const auto& row : cells) t.values.push_back(*row[*target_col]);
    target = std::move(t);
  }
  return Dataset::from_matrix(std::move(names), std::move(matrix), std::move(target),
                              std::move(ids), std::move(missing));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options);
}

namespace {

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string to_csv(const Dataset& dataset) {
  std::string out;
  for (std::size_t j = 0; j < dataset.n_features(); ++j) {
    if (j) out.push_back(',');
    out += quote_if_needed(dataset.feature(j).name);
  }
  if (dataset.target()) out += "," + quote_if_needed(dataset.target()->name);
  out.push_back('\n');
  for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
    for (std::size_t j = 0; j < dataset.n_features(); ++j) {
      if (j) out.push_back(',');
      out += format_real(dataset.value(r, j));
    }
    if (dataset.target()) out += "," + format_real(dataset.target()->values[r]);
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_csv(dataset);
}

double feature_std(const Dataset& dataset, std::size_t feature) {
  return dataset.feature(feature).std_dev;
}

std::vector<std::int64_t> sample_rows(const Dataset& dataset, std::size_t feature,
                                      std::size_t per_quantile, std::size_t quantiles,
                                      std::uint64_t seed) {
  if (per_quantile == 0) throw InvalidArgument("per_quantile must be at least 1");
  if (quantiles == 0) throw InvalidArgument("quantiles must be at least 1");
  const FeatureMeta& meta = dataset.feature(feature);
  const std::size_t n = dataset.n_rows();

  // Strata hold row positions.
  std::vector<std::vector<std::size_t>> strata;
  if (meta.kind == FeatureKind::kContinuous) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dataset.value(a, feature) < dataset.value(b, feature);
    });
    strata.resize(quantiles);
    for (std::size_t rank = 0; rank < n; ++rank) {
      strata[rank * quantiles / n].push_back(order[rank]);
    }
  } else {
    strata.resize(meta.unique_values.size());
    for (std::size_t r = 0; r < n; ++r) {
      auto it = std::lower_bound(meta.unique_values.begin(), meta.unique_values.end(),
                                 dataset.value(r, feature));
      strata[static_cast<std::size_t>(it - meta.unique_values.begin())].push_back(r);
    }
  }

  if (n <= per_quantile * strata.size()) return dataset.row_ids();

  Rng rng = make_rng(seed, {feature});
  std::vector<std::int64_t> picked;
  for (auto& stratum : strata) {
    const std::size_t take = std::min(per_quantile, stratum.size());
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(stratum[i], stratum[i + uniform_index(rng, stratum.size() - i)]);
      picked.push_back(dataset.row_ids()[stratum[i]]);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace iceimpact
