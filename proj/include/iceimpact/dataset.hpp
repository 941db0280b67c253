#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iceimpact/matrix.hpp"

namespace iceimpact {

enum class FeatureKind { kContinuous, kCategoricalOrdinal, kBinary };

std::string to_string(FeatureKind kind);
// Accepts "continuous", "categorical-ordinal" (or "categorical"), "binary".
FeatureKind parse_feature_kind(const std::string& text);

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  double std_dev = 0.0;               // sample SD, n-1 denominator
  std::vector<double> unique_values;  // strictly increasing
  std::size_t missing_count = 0;      // cells imputed or dropped at load

  bool operator==(const FeatureMeta&) const = default;
};

struct Target {
  std::string name;
  std::vector<double> values;

  bool operator==(const Target&) const = default;
};

enum class ImputePolicy { kMean, kDropRow };

struct CsvOptions {
  std::optional<std::string> target;
  std::string missing_marker = "?";
  ImputePolicy impute = ImputePolicy::kMean;
};

// Immutable feature matrix plus per-feature statistics. Safe for concurrent
// reads.
class Dataset {
 public:
  // Builds a dataset and derives FeatureMeta for every column. Row ids
  // default to 0..n-1 and must be strictly increasing when given.
  // `missing_counts`, when non-empty, has one entry per column.
  static Dataset from_matrix(std::vector<std::string> names, Matrix rows,
                             std::optional<Target> target = std::nullopt,
                             std::vector<std::int64_t> row_ids = {},
                             std::vector<std::size_t> missing_counts = {});

  std::size_t n_rows() const { return rows_.rows(); }
  std::size_t n_features() const { return features_.size(); }

  const Matrix& rows() const { return rows_; }
  std::span<const double> row(std::size_t index) const { return rows_.row(index); }
  double value(std::size_t row, std::size_t feature) const { return rows_(row, feature); }
  std::vector<double> column(std::size_t feature) const { return rows_.column(feature); }

  const std::vector<FeatureMeta>& features() const { return features_; }
  const FeatureMeta& feature(std::size_t index) const;
  // Index of the named feature; throws InvalidArgument when absent.
  std::size_t feature_index(const std::string& name) const;
  std::vector<std::string> feature_names() const;

  const std::optional<Target>& target() const { return target_; }
  const Target& require_target() const;

  const std::vector<std::int64_t>& row_ids() const { return row_ids_; }
  // Position of a row id; throws InvalidArgument when unknown.
  std::size_t index_of(std::int64_t row_id) const;

  // Copy with feature kinds replaced. Binary overrides are validated
  // against the column values.
  Dataset with_kinds(const std::map<std::string, FeatureKind>& kinds) const;

  bool operator==(const Dataset&) const = default;

 private:
  Dataset() = default;

  Matrix rows_;
  std::vector<FeatureMeta> features_;
  std::optional<Target> target_;
  std::vector<std::int64_t> row_ids_;
};

// Reads an RFC-4180 CSV with a header row. Cells equal to the missing marker
// (or empty) are missing. Row ids are the zero-based data line numbers, so
// they survive drop-row imputation. Rows with a missing target are always
// dropped.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);
Dataset parse_csv(const std::string& text, const CsvOptions& options);

// Writes features then target (if any) with 17 significant digits.
void write_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);

// Sample standard deviation of one feature (0 for constant columns).
double feature_std(const Dataset& dataset, std::size_t feature);

// Row ids stratified by the at-issue feature: `quantiles` equal-count bins
// for continuous features, one stratum per distinct value otherwise; up to
// `per_quantile` rows drawn without replacement from each stratum. Returns
// every row id when the population does not exceed the requested total.
// Output is sorted ascending.
std::vector<std::int64_t> sample_rows(const Dataset& dataset, std::size_t feature,
                                      std::size_t per_quantile, std::size_t quantiles,
                                      std::uint64_t seed);

namespace stats {

double mean(std::span<const double> values);
// Sample SD (n-1). Zero for fewer than two values.
double sample_sd(std::span<const double> values);

}  // namespace stats

}  // namespace iceimpact
