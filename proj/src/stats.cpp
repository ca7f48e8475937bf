#include "neuroaffect/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace na {

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<int>& actual,
                                                  const std::vector<int>& predicted) {
  if (actual.size() != predicted.size())
    throw std::invalid_argument("ConfusionMatrix: size mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || actual[i] > 2 || predicted[i] < 0 || predicted[i] > 2)
      throw std::invalid_argument("ConfusionMatrix: class id out of range");
    ++cm.counts[actual[i]][predicted[i]];
  }
  return cm;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

void ConfusionMatrix::add(const ConfusionMatrix& other) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) counts[i][j] += other.counts[i][j];
}

Metrics metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (total == 0.0) throw std::invalid_argument("metrics: empty confusion matrix");
  Metrics m;
  double diag = 0.0;
  for (int c = 0; c < 3; ++c) diag += cm.counts[c][c];
  m.accuracy = diag / total;

  for (int c = 0; c < 3; ++c) {
    double tp = cm.counts[c][c];
    double fp = 0.0, fn = 0.0, support = 0.0;
    for (int o = 0; o < 3; ++o) {
      support += cm.counts[c][o];
      if (o != c) {
        fp += cm.counts[o][c];
        fn += cm.counts[c][o];
      }
    }
    ClassMetrics& cls = m.per_class[c];
    cls.support = static_cast<std::size_t>(support);
    if (tp + fp == 0.0) { cls.precision = 0.0; cls.zero_division = true; }
    else cls.precision = tp / (tp + fp);
    if (tp + fn == 0.0) { cls.recall = 0.0; cls.zero_division = true; }
    else cls.recall = tp / (tp + fn);
    cls.f1 = (cls.precision + cls.recall) > 0.0
                 ? 2.0 * cls.precision * cls.recall / (cls.precision + cls.recall)
                 : 0.0;
    m.macro_precision += cls.precision / 3.0;
    m.macro_recall += cls.recall / 3.0;
    m.macro_f1 += cls.f1 / 3.0;
    m.weighted_precision += cls.precision * support / total;
    m.weighted_recall += cls.recall * support / total;
    m.weighted_f1 += cls.f1 * support / total;
  }
  return m;
}

namespace {

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

StatTestResult friedman(const std::vector<std::vector<double>>& scores) {
  const std::size_t m = scores.size();
  if (m < 2) throw std::invalid_argument("friedman: need >= 2 methods");
  const std::size_t k = scores[0].size();
  if (k < 2) throw std::invalid_argument("friedman: need >= 2 folds");
  for (const auto& row : scores)
    if (row.size() != k)
      throw std::invalid_argument("friedman: ragged score table");

  std::vector<double> mean_rank(m, 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<double> col(m);
    for (std::size_t j = 0; j < m; ++j) col[j] = scores[j][fold];
    const auto ranks = average_ranks(col);
    for (std::size_t j = 0; j < m; ++j) mean_rank[j] += ranks[j] / k;
  }
  double sum_sq = 0.0;
  for (double r : mean_rank) sum_sq += r * r;
  const double md = static_cast<double>(m);
  const double chi = 12.0 * k / (md * (md + 1.0)) *
                     (sum_sq - md * (md + 1.0) * (md + 1.0) / 4.0);
  StatTestResult res;
  res.method = "friedman";
  res.statistic = std::max(0.0, chi);
  res.p_value = res.statistic == 0.0 ? 1.0 : chi_square_sf(res.statistic, m - 1);
  return res;
}

StatTestResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("wilcoxon: length mismatch");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);

  StatTestResult res;
  res.method = "wilcoxon_signed_rank";
  if (diffs.empty()) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const std::size_t n = diffs.size();
  std::vector<double> abs_d(n);
  for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);
  const auto ranks = average_ranks(abs_d);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    (diffs[i] > 0.0 ? w_plus : w_minus) += ranks[i];
  const double w = std::min(w_plus, w_minus);
  res.statistic = w;

  if (n <= 15) {
    // Exact: enumerate all 2^n sign assignments of the observed ranks.
    const std::size_t total = std::size_t{1} << n;
    std::size_t at_or_below = 0;
    for (std::size_t mask = 0; mask < total; ++mask) {
      double wp = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1) wp += ranks[i];
      if (wp <= w + 1e-12) ++at_or_below;
    }
    res.p_value = std::min(1.0, 2.0 * static_cast<double>(at_or_below) / total);
  } else {
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    // tie correction on the variance
    double tie_term = 0.0;
    std::vector<double> sorted = abs_d;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    // W = min(W+, W-) sits at or below the mean; continuity correction of 0.5.
    const double z = std::max(0.0, mean - w - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * normal_sf(z));
  }
  return res;
}

std::vector<double> bonferroni(const std::vector<double>& pvals, std::size_t m) {
  std::vector<double> out;
  out.reserve(pvals.size());
  for (double p : pvals) out.push_back(std::min(1.0, p * static_cast<double>(m)));
  return out;
}

std::pair<double, double> bootstrap_ci(const std::vector<int>& predictions,
                                       const std::vector<int>& labels,
                                       std::size_t n_resamples, double level,
                                       std::uint64_t seed) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw std::invalid_argument("bootstrap_ci: bad inputs");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("bootstrap_ci: level must be in (0,1)");

  // Group cases by true class so resamples preserve the class mix.
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(labels[i]);
    if (by_class.size() <= c) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::vector<double> accs(n_resamples);
  const double n = static_cast<double>(labels.size());
  for (std::size_t r = 0; r < n_resamples; ++r) {
    std::size_t correct = 0;
    for (const auto& cls : by_class) {
      if (cls.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, cls.size() - 1);
      for (std::size_t t = 0; t < cls.size(); ++t) {
        const std::size_t i = cls[pick(rng)];
        if (predictions[i] == labels[i]) ++correct;
      }
    }
    accs[r] = correct / n;
  }
  std::sort(accs.begin(), accs.end());
  const double alpha = 1.0 - level;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n_resamples - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n_resamples - 1);
    const double frac = pos - static_cast<double>(lo);
    return accs[lo] * (1.0 - frac) + accs[hi] * frac;
  };
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

double overfitting_gap(double train_accuracy, double val_accuracy) {
  if (train_accuracy < 0.0 || train_accuracy > 1.0 || val_accuracy < 0.0 ||
      val_accuracy > 1.0)
    throw std::invalid_argument("overfitting_gap: accuracies must be in [0,1]");
  return train_accuracy - val_accuracy;
}

// --- numerical helpers ----------------------------------------------------

namespace {

// Regularized lower incomplete gamma P(a,x) by series; Q by continued
// fraction (Lentz). Standard formulations.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_sf(double x, std::size_t df) {
  if (x < 0.0) return 1.0;
  if (x == 0.0) return 1.0;
  const double a = static_cast<double>(df) / 2.0;
  const double xx = x / 2.0;
  if (xx < a + 1.0) return 1.0 - gamma_p_series(a, xx);
  return gamma_q_contfrac(a, xx);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace na
