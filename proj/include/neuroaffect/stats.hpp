#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace na {

// 3x3 counts, rows = actual class, cols = predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};

  static ConfusionMatrix from_predictions(const std::vector<int>& actual,
                                          const std::vector<int>& predicted);
  std::size_t total() const;
  void add(const ConfusionMatrix& other);
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool zero_division = false;  // precision or recall hit an empty denominator
};

struct Metrics {
  double accuracy = 0.0;
  std::array<ClassMetrics, 3> per_class;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
};

Metrics metrics(const ConfusionMatrix& cm);

struct StatTestResult {
  std::string method;
  double statistic = 0.0;
  double p_value = 1.0;
  std::string correction;  // "" or "bonferroni"
};

// Friedman omnibus test over an M-methods x K-folds score table (scores[m][k]).
// Average ranks for ties; chi-square upper tail with M-1 df.
StatTestResult friedman(const std::vector<std::vector<double>>& scores);

// Two-sided paired Wilcoxon signed-rank test. Zero differences dropped, ties
// get average ranks, W = min(W+, W-). Exact enumeration for n <= 15, normal
// approximation with continuity correction beyond.
StatTestResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

// Multiplies each p by m, capped at 1.
std::vector<double> bonferroni(const std::vector<double>& pvals, std::size_t m);

// Stratified case-resampling percentile bootstrap over accuracy.
std::pair<double, double> bootstrap_ci(const std::vector<int>& predictions,
                                       const std::vector<int>& labels,
                                       std::size_t n_resamples = 1000,
                                       double level = 0.95,
                                       std::uint64_t seed = 0);

// train accuracy minus validation accuracy; may be negative.
double overfitting_gap(double train_accuracy, double val_accuracy);

// Upper-tail chi-square survival function (regularized incomplete gamma).
double chi_square_sf(double x, std::size_t df);
// Standard normal survival function.
double normal_sf(double z);

}  // namespace na
