#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "iceimpact/dataset.hpp"
#include "iceimpact/phantom.hpp"
#include "iceimpact/predictors.hpp"

namespace iceimpact::testing {

inline std::vector<std::string> names(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("x" + std::to_string(j));
  return out;
}

// Dataset from explicit rows, optional target.
inline Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                            std::optional<std::vector<double>> target = std::nullopt) {
  Matrix m = Matrix::from_rows(rows);
  std::optional<Target> t;
  if (target) t = Target{"y", *target};
  return Dataset::from_matrix(names(m.cols()), std::move(m), std::move(t));
}

// n x p standard normal features (seeded).
inline Matrix normal_matrix(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) m(i, j) = dist(rng);
  }
  return m;
}

// Columns rescaled to mean 0 and sample SD 1.
inline Matrix standardize(Matrix m) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    const auto col = m.column(j);
    const double mu = stats::mean(col);
    const double sd = stats::sample_sd(col);
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = (m(i, j) - mu) / sd;
  }
  return m;
}

inline PredictorHandle linear(double intercept, std::vector<double> coef) {
  FittedLinearModel model{intercept, std::move(coef), false};
  return std::make_shared<LinearPredictor>(std::move(model));
}

// Grid assembled directly from a row function of the at-issue value alone.
inline PhantomGrid grid_of(const std::vector<double>& grid_values,
                           const std::vector<double>& real_values, double (*f)(double)) {
  PhantomGrid g;
  g.grid_values = grid_values;
  for (std::size_t i = 0; i < real_values.size(); ++i) {
    Curve c;
    c.row_id = static_cast<std::int64_t>(i);
    c.real_value = real_values[i];
    for (double x : grid_values) c.predictions.push_back(f(x));
    g.curves.push_back(std::move(c));
  }
  return g;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("iceimpact_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Rare-but-decisive vs common-but-weak. Labels follow the sign of
// x_common; x_rare is 1 on every 50th row. The predictor barely moves with
// x_common (enough to get the label right) but jumps by 0.45 on x_rare.
struct RankInversion {
  Dataset dataset;
  PredictorHandle predictor;
};

inline RankInversion rank_inversion_fixture(std::size_t n = 1000, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, 2);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = normal(rng);
    x(i, 1) = i % 50 == 0 ? 1.0 : 0.0;
    y[i] = x(i, 0) > 0.0 ? 1.0 : 0.0;
  }
  Dataset ds = Dataset::from_matrix({"x_common", "x_rare"}, std::move(x), Target{"y", std::move(y)});
  auto f = make_callable(
      [](std::span<const double> r) { return 0.5 + 0.03 * std::tanh(3.0 * r[0]) + 0.45 * r[1]; }, 2,
      OutputKind::kProbability);
  return {std::move(ds), std::move(f)};
}

}  // namespace iceimpact::testing
