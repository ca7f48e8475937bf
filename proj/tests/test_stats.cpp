#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "neuroaffect/stats.hpp"

using namespace na;

namespace {

// Independent brute-force Friedman statistic: rank each fold column with
// average ranks, then apply the textbook formula.
double friedman_bruteforce(const std::vector<std::vector<double>>& scores) {
  const std::size_t m = scores.size(), k = scores[0].size();
  std::vector<double> rank_sum(m, 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<std::pair<double, std::size_t>> col;
    for (std::size_t j = 0; j < m; ++j) col.push_back({scores[j][fold], j});
    std::sort(col.begin(), col.end());
    std::size_t i = 0;
    while (i < m) {
      std::size_t j = i;
      while (j + 1 < m && col[j + 1].first == col[i].first) ++j;
      double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) rank_sum[col[t].second] += shared;
      i = j + 1;
    }
  }
  double sum_sq = 0.0;
  for (double r : rank_sum) {
    double mean_rank = r / k;
    sum_sq += mean_rank * mean_rank;
  }
  const double md = static_cast<double>(m);
  return 12.0 * k / (md * (md + 1.0)) *
         (sum_sq - md * (md + 1.0) * (md + 1.0) / 4.0);
}

// Exhaustive Wilcoxon two-sided p for comparison, all 2^n sign vectors.
double wilcoxon_bruteforce_p(const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
  if (diffs.empty()) return 1.0;
  const std::size_t n = diffs.size();
  std::vector<double> abs_d(n);
  for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);
  // average ranks
  std::vector<std::pair<double, std::size_t>> ord;
  for (std::size_t i = 0; i < n; ++i) ord.push_back({abs_d[i], i});
  std::sort(ord.begin(), ord.end());
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && ord[j + 1].first == ord[i].first) ++j;
    double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[ord[t].second] = shared;
    i = j + 1;
  }
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    (diffs[t] > 0 ? w_plus : w_minus) += ranks[t];
  const double w = std::min(w_plus, w_minus);
  const std::size_t total = std::size_t{1} << n;
  std::size_t count = 0;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double wp = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      if ((mask >> t) & 1) wp += ranks[t];
    if (wp <= w + 1e-12) ++count;
  }
  return std::min(1.0, 2.0 * static_cast<double>(count) / total);
}

}  // namespace

TEST_CASE("hand confusion matrix fixture") {
  // rows = actual, cols = predicted
  ConfusionMatrix cm;
  cm.counts = {{{8, 1, 1}, {0, 9, 1}, {1, 0, 9}}};
  Metrics m = metrics(cm);
  CHECK(m.accuracy == doctest::Approx(26.0 / 30.0).epsilon(1e-12));
  // class 0: tp=8, fp=1, fn=2
  CHECK(m.per_class[0].precision == doctest::Approx(8.0 / 9.0));
  CHECK(m.per_class[0].recall == doctest::Approx(8.0 / 10.0));
  // class 1: tp=9, fp=1, fn=1
  CHECK(m.per_class[1].precision == doctest::Approx(9.0 / 10.0));
  CHECK(m.per_class[1].recall == doctest::Approx(9.0 / 10.0));
  // class 2: tp=9, fp=2, fn=1
  CHECK(m.per_class[2].precision == doctest::Approx(9.0 / 11.0));
  CHECK(m.per_class[2].recall == doctest::Approx(9.0 / 10.0));
  // equal supports -> macro equals weighted
  CHECK(m.macro_f1 == doctest::Approx(m.weighted_f1).epsilon(1e-12));
}

TEST_CASE("diagonal confusion matrix gives perfect metrics") {
  ConfusionMatrix cm;
  cm.counts = {{{10, 0, 0}, {0, 7, 0}, {0, 0, 13}}};
  Metrics m = metrics(cm);
  CHECK(m.accuracy == 1.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(m.per_class[c].precision == 1.0);
    CHECK(m.per_class[c].recall == 1.0);
    CHECK(m.per_class[c].f1 == 1.0);
  }
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.weighted_f1 == 1.0);
}

TEST_CASE("precision == recall == p implies F1 == p") {
  ConfusionMatrix cm;
  // class 0: tp=3, fp=1, fn=1 -> p = r = 0.75
  cm.counts = {{{3, 1, 0}, {1, 8, 0}, {0, 0, 9}}};
  Metrics m = metrics(cm);
  CHECK(m.per_class[0].precision == doctest::Approx(0.75));
  CHECK(m.per_class[0].recall == doctest::Approx(0.75));
  CHECK(m.per_class[0].f1 == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("zero-division flag set for absent predictions") {
  ConfusionMatrix cm;
  cm.counts = {{{5, 0, 0}, {5, 0, 0}, {5, 0, 0}}};  // nothing predicted as 1/2
  Metrics m = metrics(cm);
  CHECK(m.per_class[1].zero_division);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[2].zero_division);
}

TEST_CASE("from_predictions and add") {
  auto cm = ConfusionMatrix::from_predictions({0, 1, 2, 0}, {0, 1, 1, 2});
  CHECK(cm.counts[0][0] == 1);
  CHECK(cm.counts[2][1] == 1);
  CHECK(cm.counts[0][2] == 1);
  CHECK(cm.total() == 4);
  ConfusionMatrix other = cm;
  other.add(cm);
  CHECK(other.total() == 8);
  CHECK_THROWS(ConfusionMatrix::from_predictions({0}, {0, 1}));
  CHECK_THROWS(ConfusionMatrix::from_predictions({3}, {0}));
}

TEST_CASE("friedman fixture with clean ranking") {
  // three methods, four folds, method order always the same
  std::vector<std::vector<double>> scores = {
      {0.9, 0.91, 0.89, 0.92},   // always best -> rank 3
      {0.8, 0.81, 0.79, 0.82},   // middle -> rank 2
      {0.7, 0.71, 0.69, 0.72}};  // worst -> rank 1
  StatTestResult r = friedman(scores);
  CHECK(r.statistic == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(chi_square_sf(8.0, 2)).epsilon(1e-12));
}

TEST_CASE("friedman matches brute force on 20 random fixtures") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> md(2, 6), kd(2, 8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = md(rng), k = kd(rng);
    std::vector<std::vector<double>> scores(m, std::vector<double>(k));
    for (auto& row : scores)
      for (auto& v : row) v = std::round(u(rng) * 10.0) / 10.0;  // force ties
    StatTestResult r = friedman(scores);
    CHECK(r.statistic == doctest::Approx(friedman_bruteforce(scores)).epsilon(1e-9));
  }
}

TEST_CASE("friedman identical scores give statistic 0 and p 1") {
  std::vector<std::vector<double>> scores = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  StatTestResult r = friedman(scores);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("wilcoxon n=6 all-positive fixture -> p = 2/64") {
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> b = {0.5, 1.4, 2.1, 3.3, 4.2, 5.0};
  StatTestResult r = wilcoxon_signed_rank(a, b);
  CHECK(r.statistic == 0.0);  // all differences positive -> W- = 0
  CHECK(r.p_value == doctest::Approx(2.0 / 64.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon matches exhaustive enumeration for n <= 12") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 2; n <= 12; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = std::round(u(rng) * 5.0) / 5.0;
        b[i] = std::round(u(rng) * 5.0) / 5.0;
      }
      StatTestResult r = wilcoxon_signed_rank(a, b);
      CHECK(r.p_value == doctest::Approx(wilcoxon_bruteforce_p(a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("wilcoxon identical sequences") {
  std::vector<double> a = {1, 2, 3};
  StatTestResult r = wilcoxon_signed_rank(a, a);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("wilcoxon large-n normal approximation is sane") {
  // 20 paired values, consistent positive shift: p should be small
  std::vector<double> a(20), b(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = i + 1.0;
    b[i] = a[i] - 0.5 - 0.01 * i;
  }
  StatTestResult r = wilcoxon_signed_rank(a, b);
  CHECK(r.p_value < 0.001);
  CHECK(r.p_value > 0.0);
}

TEST_CASE("bonferroni fixture") {
  auto adj = bonferroni({0.01, 0.2, 0.5}, 3);
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.6));
  CHECK(adj[2] == 1.0);  // capped
}

TEST_CASE("bootstrap degenerate cases") {
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  // all correct -> CI [1, 1]
  auto [lo, hi] = bootstrap_ci(labels, labels, 200, 0.95, 1);
  CHECK(lo == 1.0);
  CHECK(hi == 1.0);
  // all wrong -> CI [0, 0]
  std::vector<int> wrong = {1, 1, 2, 2, 0, 0};
  auto [lo2, hi2] = bootstrap_ci(wrong, labels, 200, 0.95, 1);
  CHECK(lo2 == 0.0);
  CHECK(hi2 == 0.0);
}

TEST_CASE("bootstrap interval brackets the point accuracy") {
  std::mt19937 rng(3);
  std::vector<int> labels, preds;
  for (int i = 0; i < 300; ++i) {
    labels.push_back(i % 3);
    preds.push_back(rng() % 10 < 8 ? i % 3 : (i + 1) % 3);  // ~80% accuracy
  }
  double acc = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == preds[i]) acc += 1.0 / labels.size();
  auto [lo, hi] = bootstrap_ci(preds, labels, 1000, 0.95, 5);
  CHECK(lo < acc);
  CHECK(hi > acc);
  CHECK(hi - lo < 0.2);
  CHECK(lo > acc - 0.15);
}

TEST_CASE("wider level gives wider interval") {
  std::mt19937 rng(4);
  std::vector<int> labels, preds;
  for (int i = 0; i < 150; ++i) {
    labels.push_back(i % 3);
    preds.push_back(rng() % 10 < 7 ? i % 3 : (i + 2) % 3);
  }
  auto [lo90, hi90] = bootstrap_ci(preds, labels, 2000, 0.90, 8);
  auto [lo99, hi99] = bootstrap_ci(preds, labels, 2000, 0.99, 8);
  CHECK(hi99 - lo99 >= hi90 - lo90);
}

TEST_CASE("bootstrap is deterministic per seed") {
  std::vector<int> labels = {0, 0, 1, 1, 2, 2, 0, 1, 2};
  std::vector<int> preds = {0, 1, 1, 1, 2, 0, 0, 1, 2};
  auto a = bootstrap_ci(preds, labels, 500, 0.95, 42);
  auto b = bootstrap_ci(preds, labels, 500, 0.95, 42);
  CHECK(a == b);
}

TEST_CASE("overfitting gap sign convention") {
  CHECK(overfitting_gap(0.9975, 0.9919) == doctest::Approx(0.0056));
  CHECK(overfitting_gap(0.9, 0.95) == doctest::Approx(-0.05));
  CHECK_THROWS(overfitting_gap(1.2, 0.5));
}

TEST_CASE("chi-square survival function spot values") {
  // classic table values
  CHECK(chi_square_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_sf(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi_square_sf(0.0, 3) == 1.0);
  // df=2 closed form: exp(-x/2)
  for (double x : {0.5, 1.0, 2.0, 5.0, 12.45})
    CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-10));
}

TEST_CASE("normal survival function spot values") {
  CHECK(normal_sf(0.0) == doctest::Approx(0.5));
  CHECK(normal_sf(1.959963985) == doctest::Approx(0.025).epsilon(1e-6));
  CHECK(normal_sf(-1.0) == doctest::Approx(1.0 - normal_sf(1.0)).epsilon(1e-12));
}
