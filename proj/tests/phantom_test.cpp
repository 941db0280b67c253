#include "iceimpact/phantom.hpp"

#include <gtest/gtest.h>

#include <atomic>

#include "iceimpact/error.hpp"
#include "iceimpact/random.hpp"
#include "test_util.hpp"

namespace iceimpact {
namespace {

using testing::make_dataset;

TEST(BuildGrid, Counts) {
  std::atomic<std::size_t> calls{0};
  const auto counter = make_callable(
      [&calls](std::span<const double> r) {
        ++calls;
        return r[0] + r[1];
      },
      2);
  const Dataset ds = make_dataset({{0.0, 5.0}, {2.0, 6.0}, {1.0, 6.0}});
  const PhantomGrid grid = build_grid(ds, *counter, 0, {0, 1});
  EXPECT_EQ(grid.n_obs(), 2u);
  EXPECT_EQ(grid.n_grid(), 3u);
  EXPECT_EQ(grid.grid_values, (std::vector<double>{0.0, 1.0, 2.0}));
  for (const auto& c : grid.curves) EXPECT_EQ(c.predictions.size(), 3u);
  EXPECT_EQ(calls.load(), 6u);
  EXPECT_EQ(grid.curves[1].row_id, 1);
  EXPECT_EQ(grid.curves[1].real_value, 2.0);
}

TEST(BuildGrid, ConstantFeature) {
  const Dataset ds = make_dataset({{4.0, 1.0}, {4.0, 2.0}, {4.0, 3.0}});
  const PhantomGrid grid = build_grid(ds, *testing::linear(0.0, {1.0, 1.0}), 0);
  EXPECT_EQ(grid.n_grid(), 1u);
  for (const auto& c : grid.curves) EXPECT_EQ(c.predictions.size(), 1u);
}

TEST(BuildGrid, LinearCurve) {
  const Dataset ds = make_dataset({{0.0, 9.0}, {1.0, -4.0}, {3.0, 0.5}});
  const PhantomGrid grid = build_grid(ds, *testing::linear(0.0, {2.0, 0.0}), 0);
  for (const auto& c : grid.curves) EXPECT_EQ(c.predictions, (std::vector<double>{0, 2, 6}));
}

TEST(BuildGrid, Errors) {
  const Dataset ds = make_dataset({{0.0, 1.0}, {1.0, 0.0}});
  const auto model = testing::linear(0.0, {1.0, 1.0});
  EXPECT_THROW(build_grid(ds, *model, 5), InvalidArgument);
  EXPECT_THROW(build_grid(ds, *model, 0, std::vector<std::int64_t>{}), InvalidArgument);
  EXPECT_THROW(build_grid(ds, *model, 0, std::vector<std::int64_t>{7}), InvalidArgument);
}

TEST(BuildGrid, PredictorFailureCarriesFeature) {
  const Dataset ds = make_dataset({{0.0, 1.0}, {1.0, 0.0}});
  const auto wrong_width = testing::linear(0.0, {1.0, 1.0, 1.0});
  try {
    build_grid(ds, *wrong_width, 1);
    FAIL() << "expected FeatureError";
  } catch (const FeatureError& e) {
    EXPECT_EQ(e.feature(), 1u);
    EXPECT_THROW(std::rethrow_if_nested(e), DimensionMismatchError);
  }
}

Dataset random_dataset(std::uint64_t seed, std::size_t n) {
  Rng rng = make_rng(seed);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({static_cast<double>(uniform_index(rng, 5)), uniform_unit(rng),
                    static_cast<double>(uniform_index(rng, 2))});
  }
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(r[0] * r[1] + r[2]);
  return make_dataset(rows, y);
}

TEST(BuildGridProperty, OwnValueMatchesOriginalPrediction) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = random_dataset(seed, 40);
    ForestOptions options;
    options.n_trees = 5;
    options.seed = seed;
    const auto forest = fit_forest(ds, options);
    const auto direct = forest->predict(ds.rows());
    for (std::size_t f = 0; f < ds.n_features(); ++f) {
      const PhantomGrid grid = build_grid(ds, *forest, f, GridOptions{.chunk_observations = 7});
      for (std::size_t i = 0; i < grid.n_obs(); ++i) {
        const auto& c = grid.curves[i];
        const auto k = static_cast<std::size_t>(
            std::find(grid.grid_values.begin(), grid.grid_values.end(), c.real_value) -
            grid.grid_values.begin());
        ASSERT_LT(k, grid.n_grid());
        EXPECT_EQ(c.predictions[k], direct[i]);
      }
    }
  }
}

TEST(BuildGridProperty, DoesNotMutateDataset) {
  const Dataset ds = random_dataset(3, 25);
  const Dataset copy = ds;
  for (std::size_t f = 0; f < ds.n_features(); ++f) {
    build_grid(ds, *testing::linear(1.0, {1.0, 2.0, 3.0}), f);
  }
  EXPECT_EQ(ds, copy);
}

TEST(BuildGridProperty, ChunkSizeDoesNotMatter) {
  const Dataset ds = random_dataset(4, 33);
  const auto f = make_callable([](std::span<const double> r) { return r[0] * r[1] - r[2]; }, 3);
  const PhantomGrid whole = build_grid(ds, *f, 0);
  for (std::size_t chunk : {1u, 2u, 5u, 32u, 1000u}) {
    const PhantomGrid chunked = build_grid(ds, *f, 0, GridOptions{.chunk_observations = chunk});
    ASSERT_EQ(chunked.n_obs(), whole.n_obs());
    for (std::size_t i = 0; i < whole.n_obs(); ++i) {
      EXPECT_EQ(chunked.curves[i].predictions, whole.curves[i].predictions);
    }
  }
}

TEST(BuildGridProperty, MatchingRowsGiveIdenticalCurves) {
  // Rows 0 and 1 differ only in the at-issue feature 0.
  const Dataset ds = make_dataset({{0.0, 0.3, 1.0}, {4.0, 0.3, 1.0}, {2.0, 0.9, 0.0}});
  const auto f = make_callable(
      [](std::span<const double> r) { return std::sin(r[0] * r[1]) + r[0] * r[2]; }, 3);
  const PhantomGrid grid = build_grid(ds, *f, 0);
  EXPECT_EQ(grid.curves[0].predictions, grid.curves[1].predictions);
  EXPECT_NE(grid.curves[0].predictions, grid.curves[2].predictions);
}

}  // namespace
}  // namespace iceimpact
