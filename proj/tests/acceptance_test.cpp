// Acceptance suite. One line per criterion; nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "iceimpact/comparison.hpp"
#include "iceimpact/error.hpp"
#include "iceimpact/impact.hpp"
#include "iceimpact/random.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace iceimpact;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

void check(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

std::vector<std::size_t> all_features(const Dataset& ds) {
  std::vector<std::size_t> out(ds.n_features());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = j;
  return out;
}

// 1. Linear oracle.
Outcome linear_oracle() {
  Outcome o;
  const auto start = Clock::now();
  const Matrix x = testing::standardize(testing::normal_matrix(200, 5, 101));
  const std::vector<double> beta{1.5, -0.4, 2.2, 0.05, -1.1};
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = 0.7;
    for (std::size_t j = 0; j < 5; ++j) y[i] += beta[j] * x(i, j);
  }
  const Dataset ds = Dataset::from_matrix(testing::names(5), x, Target{"y", y});
  const FittedLinearModel fit = fit_ols(ds);
  const auto model = std::make_shared<LinearPredictor>(fit);
  const auto results = analyze_features(ds, model, all_features(ds), {0.75});
  std::vector<double> fi, coef;
  double worst = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    fi.push_back(results[j].fi);
    coef.push_back(std::abs(fit.coefficients[j]));
    worst = std::max(worst, std::abs(results[j].fi - feature_std(ds, j) * coef[j]));
  }
  const double r = pearson(fi, coef);
  const double elapsed = seconds_since(start);
  check(o, std::abs(r - 1.0) <= 1e-9, "pearson " + fmt(r));
  check(o, worst <= 1e-10, "max |fi - sigma*|b|| " + fmt(worst));
  check(o, elapsed < 1.0, "runtime " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "r - 1 = " + fmt(r - 1.0) + ", max fi error " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return o;
}

// 2. Logistic regression: FI tracks |standardized coefficients|.
Outcome pseudo_linear() {
  Outcome o;
  const auto start = Clock::now();
  const std::size_t n = 600;
  const Matrix x = testing::normal_matrix(n, 6, 202);
  const std::vector<double> beta{2.0, -1.2, 0.6, 1.6, -0.3, 0.1};
  Rng rng = make_rng(77);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = -0.2;
    for (std::size_t j = 0; j < beta.size(); ++j) z += beta[j] * x(i, j);
    y[i] = uniform_unit(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  const Dataset ds = Dataset::from_matrix(testing::names(6), x, Target{"y", y});
  const auto model = fit_logistic(ds, {.epochs = 500, .learning_rate = 0.1, .seed = 1});
  const auto results = analyze_features(ds, model, all_features(ds), {1.0});
  std::vector<double> fi, coef;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    fi.push_back(results[j].fi);
    coef.push_back(std::abs(model->standardized_coefficients()[j]));
  }
  const double r = pearson(fi, coef);
  const double elapsed = seconds_since(start);
  check(o, r >= 0.7, "pearson " + fmt(r));
  check(o, elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "pearson " + fmt(r) + ", " + fmt(elapsed) + " s";
  return o;
}

// 3. idfi at lambda 1 is the same double as fi.
Outcome lambda_one_identity() {
  Outcome o;
  const Matrix x = testing::normal_matrix(80, 3, 303);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = x(i, 0) + x(i, 1) * x(i, 2) > 0 ? 1.0 : 0.0;
  const Dataset ds = Dataset::from_matrix(testing::names(3), x, Target{"y", y});
  ForestOptions forest;
  forest.n_trees = 20;
  std::vector<PredictorHandle> models{
      std::make_shared<LinearPredictor>(fit_ols(ds)),
      fit_logistic(ds, {.epochs = 100}),
      fit_forest(ds, forest),
      make_callable([](std::span<const double> r) { return std::sin(r[0]) * std::exp(r[1]) - r[2]; }, 3),
  };
  std::size_t compared = 0;
  for (const auto& m : models) {
    for (const auto& r : analyze_features(ds, m, all_features(ds), {0.5, 1.0})) {
      ++compared;
      check(o, r.idfi.at(1.0) == r.fi, to_string(m->kind()) + " feature " + std::to_string(r.feature));
    }
  }
  if (o.pass) o.detail = std::to_string(compared) + " feature/model pairs identical";
  return o;
}

// 4. HE vanishes for additive models, NL for linear ones.
Outcome zero_properties() {
  Outcome o;
  const Dataset ds = Dataset::from_matrix(testing::names(4), testing::normal_matrix(100, 4, 404));
  const auto additive = make_callable(
      [](std::span<const double> r) {
        return std::sin(r[0]) + r[1] * r[1] * r[1] - std::exp(0.5 * r[2]) + std::abs(r[3]);
      },
      4);
  const auto linear = testing::linear(-1.0, {0.3, 2.0, -4.5, 1.25});
  double he = 0, nl = 0;
  for (const auto& r : analyze_features(ds, additive, all_features(ds), {1.0})) {
    he = std::max(he, r.heterogeneity);
  }
  for (const auto& r : analyze_features(ds, linear, all_features(ds), {1.0})) {
    nl = std::max(nl, r.non_linearity);
  }
  check(o, he <= 1e-10, "max HE " + fmt(he));
  check(o, nl <= 1e-10, "max NL " + fmt(nl));
  if (o.pass) o.detail = "max HE " + fmt(he) + ", max NL " + fmt(nl);
  return o;
}

// 5. Module output against direct double-loop evaluation.
Outcome brute_force() {
  Outcome o;
  Rng rng = make_rng(505);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 4);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({0.5 * static_cast<double>(uniform_index(rng, 4)),
                      static_cast<double>(uniform_index(rng, 3)) - 1.0});
    }
    testing::Piecewise pw;
    for (std::size_t j = 0; j < 1 + uniform_index(rng, 3); ++j) {
      pw.knots.push_back(2.0 * uniform_unit(rng));
      pw.slopes.push_back(2.0 * uniform_unit(rng) - 1.0);
    }
    pw.mix = uniform_unit(rng);
    const double lambda = 0.05 + 0.95 * uniform_unit(rng);
    const Dataset ds = testing::make_dataset(rows);
    const auto model = make_callable(pw, 2);
    for (std::size_t s = 0; s < 2; ++s) {
      const auto ref = testing::brute_force(rows, s, pw, lambda);
      const auto got = analyze_feature(ds, *model, s, {lambda});
      for (double e : {got.fi - ref.fi, got.idfi.at(lambda) - ref.idfi, got.heterogeneity - ref.he,
                       got.non_linearity - ref.nl, got.fi_directional - ref.fi_dir}) {
        worst = std::max(worst, std::abs(e));
      }
    }
  }
  check(o, worst <= 1e-12, "max deviation " + fmt(worst));
  if (o.pass) o.detail = "50 instances, max deviation " + fmt(worst);
  return o;
}

// 6. Hand-computed x^2 fixture.
Outcome hand_fixture() {
  Outcome o;
  const auto sq = [](double x) { return x * x; };
  const PhantomGrid many = testing::grid_of({0, 1, 2}, {0, 1, 2}, +sq);
  const PhantomGrid one = testing::grid_of({0, 1, 2}, {0}, +sq);
  const double fi = feature_impact(many, 1.0);
  const double nl = non_linearity(many, 1.0);
  const double he = heterogeneity(many, 1.0);
  const double idfi = in_distribution_impact(one, 1.0, 0.5);
  check(o, std::abs(fi - 2.0) <= 1e-12, "FI " + fmt(fi));
  check(o, std::abs(nl - std::sqrt(2.0)) <= 1e-12, "NL " + fmt(nl));
  check(o, std::abs(he) <= 1e-12, "HE " + fmt(he));
  check(o, std::abs(idfi - 5.0 / 3.0) <= 1e-12, "IDFI " + fmt(idfi));
  if (o.pass) o.detail = "FI 2, NL sqrt(2), HE 0, IDFI 5/3";
  return o;
}

// 7. Invariances.
Outcome invariance() {
  Outcome o;
  const Matrix base = testing::normal_matrix(60, 3, 707);
  const std::function<double(std::span<const double>)> f = [](std::span<const double> r) {
    return std::tanh(r[0] * r[1]) + 0.4 * r[0] * r[0] - r[2];
  };
  const Dataset ds = Dataset::from_matrix(testing::names(3), base);
  const auto ref = analyze_feature(ds, *make_callable(f, 3), 0, {1.0});
  double worst = 0;
  for (double a : {10.0, 0.2, -3.0}) {
    for (double c : {0.0, 42.0, -5.5}) {
      Matrix moved = base;
      for (std::size_t i = 0; i < moved.rows(); ++i) moved(i, 0) = a * base(i, 0) + c;
      const auto g = make_callable(
          [f, a, c](std::span<const double> r) {
            std::vector<double> back(r.begin(), r.end());
            back[0] = (back[0] - c) / a;
            return f(back);
          },
          3);
      const auto got =
          analyze_feature(Dataset::from_matrix(testing::names(3), moved), *g, 0, {1.0});
      worst = std::max({worst, std::abs(got.fi - ref.fi), std::abs(got.heterogeneity - ref.heterogeneity),
                        std::abs(got.non_linearity - ref.non_linearity)});
    }
  }
  check(o, worst <= 1e-10, "scale/shift deviation " + fmt(worst));

  Rng rng = make_rng(708);
  double norm_worst = 0, pearson_worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(3 + uniform_index(rng, 6)), b(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = 4.0 * uniform_unit(rng) - 2.0;
      b[j] = uniform_unit(rng);
    }
    const MetricVector v{"m", testing::names(a.size()), a, false};
    const auto once = normalize(v);
    const auto twice = normalize(once);
    for (std::size_t j = 0; j < a.size(); ++j) {
      norm_worst = std::max(norm_worst, std::abs(once.values[j] - twice.values[j]));
    }
    std::vector<double> moved = a;
    const double scale = 0.5 + 5.0 * uniform_unit(rng);
    for (double& x : moved) x = scale * x + 3.0;
    pearson_worst = std::max(pearson_worst, std::abs(pearson(moved, b) - pearson(a, b)));
  }
  check(o, norm_worst <= 1e-10, "normalization idempotence " + fmt(norm_worst));
  check(o, pearson_worst <= 1e-10, "pearson affine " + fmt(pearson_worst));
  if (o.pass) {
    o.detail = "scale/shift " + fmt(worst) + ", normalize " + fmt(norm_worst) + ", pearson " +
               fmt(pearson_worst);
  }
  return o;
}

// 8. A rare decisive feature outranks a common weak one under FI, and the
// order flips under permutation importance.
Outcome rank_inversion() {
  Outcome o;
  const auto fx = testing::rank_inversion_fixture();
  ReportOptions options;
  options.permutation.repeats = 10;
  options.permutation.seed = 8;
  const auto rep = report(fx.dataset, fx.predictor, {parse_metric("fi"), parse_metric("perm")},
                          {0.75}, options);
  const double fi_common = rep.normalized[0].at("x_common");
  const double fi_rare = rep.normalized[0].at("x_rare");
  const double perm_common = rep.normalized[1].at("x_common");
  const double perm_rare = rep.normalized[1].at("x_rare");
  check(o, fi_rare > fi_common, "FI rare " + fmt(fi_rare) + " <= common " + fmt(fi_common));
  check(o, perm_common > perm_rare,
        "perm common " + fmt(perm_common) + " <= rare " + fmt(perm_rare));
  if (o.pass) {
    o.detail = "FI rare/common " + fmt(fi_rare) + "/" + fmt(fi_common) + ", perm rare/common " +
               fmt(perm_rare) + "/" + fmt(perm_common);
  }
  return o;
}

template <typename E>
bool raises(const std::string& mode, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  ExternalOptions options;
  options.timeout = timeout;
  try {
    auto model = external_predictor({ICE_STUB_PATH, mode}, options);
    model->predict(Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    model->finish();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

// 9. Batch protocol round trip and failure classes.
Outcome protocol() {
  Outcome o;
  const Matrix x = testing::normal_matrix(100, 4, 909);
  const Dataset ds = Dataset::from_matrix(testing::names(4), x);
  auto mean = [](std::span<const double> r) {
    double sum = 0.0;
    for (double v : r) sum += v;
    return sum / static_cast<double>(r.size());
  };
  auto external = external_predictor({ICE_STUB_PATH, "mean"});
  const PhantomGrid remote = build_grid(ds, *external, 0, GridOptions{.chunk_observations = 7});
  external->finish();
  const PhantomGrid local = build_grid(ds, *make_callable(mean, 4), 0);
  std::size_t rows = 0, mismatches = 0;
  for (std::size_t i = 0; i < local.n_obs(); ++i) {
    for (std::size_t k = 0; k < local.n_grid(); ++k) {
      ++rows;
      if (remote.curves[i].predictions[k] != local.curves[i].predictions[k]) ++mismatches;
    }
  }
  check(o, rows == 10000, std::to_string(rows) + " phantom rows");
  check(o, mismatches == 0, std::to_string(mismatches) + " mismatches");
  check(o, raises<CountMismatchError>("short"), "short reply not a count mismatch");
  check(o, raises<CountMismatchError>("extra"), "extra reply not a count mismatch");
  check(o, raises<ChildProcessError>("crash"), "crash not a child failure");
  check(o, raises<MalformedResponseError>("garbage"), "garbage not malformed");
  check(o, raises<TimeoutError>("sleep", std::chrono::milliseconds(300)), "silence not a timeout");
  check(o, raises<ChildProcessError>("fail-exit"), "nonzero exit not reported");
  if (o.pass) {
    o.detail = std::to_string(rows) + " rows in " + std::to_string(external->batches_sent()) +
               " batches, 0 mismatches; 6 failure modes classified";
  }
  return o;
}

// 10. Two CLI runs, byte-identical JSON.
Outcome determinism() {
  Outcome o;
  testing::TempDir dir;
  const Matrix x = testing::normal_matrix(150, 4, 1010);
  std::ostringstream csv;
  csv.precision(17);
  csv << "a,b,c,d,label\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    csv << x(i, 0) << ',' << x(i, 1) << ',' << (i % 3) << ',' << x(i, 3) << ','
        << (x(i, 0) - x(i, 1) * x(i, 3) > 0 ? 1 : 0) << '\n';
  }
  const auto data = dir.write("data.csv", csv.str());
  std::string first, second;
  for (std::string* out : {&first, &second}) {
    const auto path = dir.file(out == &first ? "a.json" : "b.json");
    const std::string cmd = std::string(ICE_CLI_PATH) + " compute --data " + data.string() +
                            " --target label --model builtin:forest --trees 30 --seed 12" +
                            " --lambda 0.5,0.75,1 --output " + path.string();
    const int status = std::system(cmd.c_str());
    check(o, status == 0, "exit status " + std::to_string(status));
    *out = testing::read_file(path);
  }
  check(o, !first.empty(), "empty output");
  check(o, first == second, "outputs differ");
  if (o.pass) o.detail = std::to_string(first.size()) + " bytes identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"1 linear oracle", linear_oracle},
      {"2 pseudo-linear correlation", pseudo_linear},
      {"3 lambda = 1 identity", lambda_one_identity},
      {"4 zero properties", zero_properties},
      {"5 brute-force equivalence", brute_force},
      {"6 hand fixture", hand_fixture},
      {"7 invariance suite", invariance},
      {"8 rank inversion", rank_inversion},
      {"9 protocol conformance", protocol},
      {"10 end-to-end determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
