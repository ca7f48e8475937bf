#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "neuroaffect/data.hpp"
#include "neuroaffect/forest.hpp"
#include "neuroaffect/importance.hpp"

using namespace na;

TEST_CASE("mutual information identity fixture: feature == label -> ln 3") {
  // three classes, feature values perfectly aligned with class id
  std::vector<double> feature;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 30; ++i) {
      feature.push_back(static_cast<double>(c) + i * 1e-4);  // distinct values
      labels.push_back(c);
    }
  double mi = mutual_information(feature, labels, 3);
  CHECK(mi == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("mutual information of independent feature is near zero") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> feature;
  std::vector<int> labels;
  for (int i = 0; i < 3000; ++i) {
    feature.push_back(u(rng));
    labels.push_back(i % 3);
  }
  double mi = mutual_information(feature, labels, 10);
  CHECK(mi >= 0.0);
  CHECK(mi < 0.02);
}

TEST_CASE("mutual information of constant feature is zero") {
  std::vector<double> feature(60, 5.0);
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 3);
  CHECK(mutual_information(feature, labels) == 0.0);
}

TEST_CASE("anova F fixture: groups {1,2},{3,4},{5,6} -> F = 16") {
  std::vector<double> feature = {1, 2, 3, 4, 5, 6};
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  // between-group MS = 8, within-group MS = 0.5 -> F = 16
  CHECK(anova_f(feature, labels) == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("anova F matches a brute-force computation on random data") {
  std::mt19937 rng(2);
  std::normal_distribution<double> g(0, 1);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> feature;
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 12; ++i) {
        feature.push_back(g(rng) + c * 0.5);
        labels.push_back(c);
      }
    // brute force
    double grand = std::accumulate(feature.begin(), feature.end(), 0.0) /
                   feature.size();
    double ssb = 0, ssw = 0;
    for (int c = 0; c < 3; ++c) {
      double mean = 0;
      int n = 0;
      for (std::size_t i = 0; i < feature.size(); ++i)
        if (labels[i] == c) {
          mean += feature[i];
          ++n;
        }
      mean /= n;
      ssb += n * (mean - grand) * (mean - grand);
      for (std::size_t i = 0; i < feature.size(); ++i)
        if (labels[i] == c) ssw += (feature[i] - mean) * (feature[i] - mean);
    }
    const double f_ref = (ssb / 2.0) / (ssw / (feature.size() - 3.0));
    CHECK(anova_f(feature, labels) == doctest::Approx(f_ref).epsilon(1e-9));
  }
}

TEST_CASE("anova F infinity sentinel on zero within-group variance") {
  std::vector<double> feature = {1, 1, 2, 2, 3, 3};
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  CHECK(std::isinf(anova_f(feature, labels)));
  // constant everywhere is 0, not infinity
  std::vector<double> flat(6, 2.0);
  CHECK(anova_f(flat, labels) == 0.0);
}

TEST_CASE("pearson correlation fixtures") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y_up = {2, 4, 6, 8, 10};
  std::vector<double> y_dn = {5, 4, 3, 2, 1};
  CHECK(pearson_r(x, y_up) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_r(x, y_dn) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> flat(5, 3.0);
  CHECK(pearson_r(x, flat) == 0.0);
}

TEST_CASE("consensus unanimity: identical methods give identical ranking") {
  std::vector<double> scores = {0.1, 0.9, 0.5, 0.3};
  ImportanceTable t = consensus_rank({"m1", "m2", "m3"}, {scores, scores, scores});
  CHECK(t.ranking == std::vector<std::size_t>{1, 2, 3, 0});
  CHECK(t.consensus[1] == doctest::Approx(1.0));
  CHECK(t.consensus[0] == doctest::Approx(0.0));
}

TEST_CASE("consensus handles a constant method as zero contribution") {
  std::vector<double> informative = {0.0, 1.0};
  std::vector<double> flat = {0.5, 0.5};
  ImportanceTable t = consensus_rank({"a", "b"}, {informative, flat});
  CHECK(t.normalized[1][0] == 0.0);
  CHECK(t.normalized[1][1] == 0.0);
  CHECK(t.consensus[1] == doctest::Approx(0.5));  // only method a votes
  CHECK(t.ranking[0] == 1);
}

TEST_CASE("consensus maps infinity sentinel to the finite max") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> with_inf = {1.0, inf, 3.0};
  ImportanceTable t = consensus_rank({"f"}, {with_inf});
  // inf replaced by 3 -> min-max over {1, 3, 3}
  CHECK(t.normalized[0][0] == doctest::Approx(0.0));
  CHECK(t.normalized[0][1] == doctest::Approx(1.0));
  CHECK(t.normalized[0][2] == doctest::Approx(1.0));
}

TEST_CASE("ranking ties break by lower feature index") {
  std::vector<double> scores = {0.5, 0.5, 0.9};
  ImportanceTable t = consensus_rank({"m"}, {scores});
  CHECK(t.ranking == std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("five-method importance finds a planted feature") {
  auto synth = synth_generate(60, 10, FeatureCategory::Covariance, 5.0, 3);
  const auto& tb = synth.table;
  Forest rf = fit_forest(tb.values, tb.d, tb.labels, random_forest_config(3));
  Forest et = fit_forest(tb.values, tb.d, tb.labels, extra_trees_config(4));
  ImportanceTable t = five_method_importance(tb.values, tb.d, tb.labels,
                                             impurity_importance(rf),
                                             impurity_importance(et));
  REQUIRE(t.method_names.size() == 5);
  CHECK(t.method_names[0] == "random_forest");
  CHECK(t.method_names[2] == "mutual_information");
  auto planted = synth.categories.indices_of(FeatureCategory::Covariance);
  // top-ranked feature is a planted one
  CHECK(std::find(planted.begin(), planted.end(), t.ranking[0]) != planted.end());
}

namespace {

// Deterministic additive model: f(x) = sum_j c_j x_j. Its exact Shapley
// attribution is phi_j = c_j (x_j - background_j).
struct AdditiveModel {
  std::vector<double> coef;
  double operator()(const std::vector<double>& x) const {
    double s = 0;
    for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * x[j];
    return s;
  }
};

}  // namespace

TEST_CASE("shapley exact on an additive model") {
  AdditiveModel model{{1.0, -2.0, 0.5}};
  std::vector<double> sample = {2.0, 1.0, 4.0};
  std::vector<double> background = {0.0, 0.0, 0.0};
  auto phi = shapley_exact(model, sample, background);
  CHECK(phi[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(phi[1] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(phi[2] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("shapley mc matches additive ground truth with efficiency") {
  AdditiveModel model{{1.0, -2.0, 0.5, 3.0}};
  std::vector<double> sample = {1.0, 2.0, -1.0, 0.5};
  std::vector<double> background = {0.5, 0.0, 0.0, 0.0};
  ShapleyReport r = shapley_mc(model, sample, background, 500, 9);
  CHECK(r.permutations == 500);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(r.phi[j] ==
          doctest::Approx(model.coef[j] * (sample[j] - background[j])).epsilon(1e-9));
  // additivity means zero variance, so the telescoping sum is exact
  CHECK(std::abs(r.efficiency_residual) < 1e-9);
  CHECK(r.value_at_sample == doctest::Approx(model(sample)));
  CHECK(r.value_at_background == doctest::Approx(model(background)));
}

TEST_CASE("shapley symmetry: interchangeable features get equal credit") {
  // f = x0 * x1 is symmetric in (x0, x1)
  auto model = [](const std::vector<double>& x) { return x[0] * x[1]; };
  std::vector<double> sample = {2.0, 2.0};
  std::vector<double> background = {0.0, 0.0};
  auto phi = shapley_exact(model, sample, background);
  CHECK(phi[0] == doctest::Approx(phi[1]).epsilon(1e-12));
  CHECK(phi[0] + phi[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("shapley mc vs exact on a small random forest, D <= 8") {
  auto synth = synth_generate(40, 8, FeatureCategory::Statistical, 4.0, 5);
  const auto& tb = synth.table;
  ForestConfig cfg = random_forest_config(5);
  cfg.n_trees = 30;
  Forest forest = fit_forest(tb.values, tb.d, tb.labels, cfg);

  std::vector<double> background(tb.d, 0.0);
  for (std::size_t i = 0; i < tb.n; ++i)
    for (std::size_t j = 0; j < tb.d; ++j)
      background[j] += tb.at(i, j) / tb.n;

  auto sample = tb.row(0);
  const int target = predict_label(forest, sample);
  auto predictor = [&](const std::vector<double>& z) {
    return predict_proba(forest, z)[target];
  };
  auto exact = shapley_exact(predictor, sample, background);
  ShapleyReport mc = shapley_mc(predictor, sample, background, 2000, 7);
  double mae = 0.0;
  for (std::size_t j = 0; j < tb.d; ++j)
    mae += std::abs(mc.phi[j] - exact[j]) / tb.d;
  CHECK(mae < 0.01);

  // exact values satisfy efficiency identically
  double phi_sum = std::accumulate(exact.begin(), exact.end(), 0.0);
  CHECK(phi_sum ==
        doctest::Approx(predictor(sample) - predictor(background)).epsilon(1e-9));
}

TEST_CASE("correlation matrix structure") {
  std::mt19937 rng(11);
  std::normal_distribution<double> g(0, 1);
  const std::size_t n = 120, d = 6;
  std::vector<double> x(n * d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 3);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = g(rng);
    x[i * d] = labels[i] + 0.1 * g(rng);      // strongly label-linked
    x[i * d + 1] = x[i * d];                  // duplicate feature
  }
  std::vector<std::string> names = {"f0", "f1", "f2", "f3", "f4", "f5"};
  CorrelationMatrix cm = correlation_matrix(x, d, names, labels, 3);
  REQUIRE(cm.names.size() == 4);
  CHECK(cm.names.back() == "label");
  const std::size_t k = cm.names.size();
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(cm.matrix[i * k + i] == 1.0);  // exact diagonal
    for (std::size_t j = 0; j < k; ++j)
      CHECK(cm.matrix[i * k + j] == doctest::Approx(cm.matrix[j * k + i]));
  }
  // the two duplicated label-linked features are both selected and correlate ~1
  auto pos0 = std::find(cm.names.begin(), cm.names.end(), "f0");
  auto pos1 = std::find(cm.names.begin(), cm.names.end(), "f1");
  REQUIRE(pos0 != cm.names.end());
  REQUIRE(pos1 != cm.names.end());
  std::size_t i0 = pos0 - cm.names.begin(), i1 = pos1 - cm.names.begin();
  CHECK(cm.matrix[i0 * k + i1] == doctest::Approx(1.0).epsilon(1e-12));
}
