#include "neuroaffect/importance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace na {

namespace {

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

double mutual_information(const std::vector<double>& feature,
                          const std::vector<int>& labels, std::size_t n_bins) {
  if (n_bins < 2) throw std::invalid_argument("mutual_information: n_bins must be >= 2");
  const std::size_t n = feature.size();
  if (n != labels.size() || n == 0)
    throw std::invalid_argument("mutual_information: size mismatch");

  const auto [lo, hi] = std::minmax_element(feature.begin(), feature.end());
  if (*lo == *hi) return 0.0;  // constant feature

  // Equal-frequency bin edges from the sorted values.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return feature[a] < feature[b]; });
  std::vector<std::size_t> bin_of(n, 0);
  for (std::size_t r = 0; r < n; ++r)
    bin_of[order[r]] = std::min(n_bins - 1, r * n_bins / n);
  // Merge identical values split across a bin edge into the lower bin.
  for (std::size_t r = 1; r < n; ++r)
    if (feature[order[r]] == feature[order[r - 1]])
      bin_of[order[r]] = bin_of[order[r - 1]];

  int max_label = *std::max_element(labels.begin(), labels.end());
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
  std::vector<double> bin_counts(n_bins, 0.0);
  std::vector<std::vector<double>> joint(n_classes, std::vector<double>(n_bins, 0.0));
  std::vector<double> class_counts(n_classes, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bin_counts[bin_of[i]] += 1.0;
    joint[labels[i]][bin_of[i]] += 1.0;
    class_counts[labels[i]] += 1.0;
  }
  const double hx = entropy(bin_counts, static_cast<double>(n));
  double hx_given_y = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (class_counts[c] > 0.0)
      hx_given_y += (class_counts[c] / n) * entropy(joint[c], class_counts[c]);
  return std::max(0.0, hx - hx_given_y);
}

double anova_f(const std::vector<double>& feature, const std::vector<int>& labels) {
  const std::size_t n = feature.size();
  if (n != labels.size() || n == 0)
    throw std::invalid_argument("anova_f: size mismatch");
  int max_label = *std::max_element(labels.begin(), labels.end());
  const std::size_t k = static_cast<std::size_t>(max_label) + 1;
  std::vector<double> sums(k, 0.0), counts(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sums[labels[i]] += feature[i];
    counts[labels[i]] += 1.0;
  }
  std::size_t groups = 0;
  for (std::size_t g = 0; g < k; ++g)
    if (counts[g] > 0.0) {
      if (counts[g] < 2.0)
        throw std::invalid_argument("anova_f: every class needs >= 2 samples");
      ++groups;
    }
  if (groups < 2) throw std::invalid_argument("anova_f: need >= 2 groups");

  double grand = std::accumulate(feature.begin(), feature.end(), 0.0) / n;
  double ss_between = 0.0, ss_within = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    if (counts[g] > 0.0) {
      const double mean_g = sums[g] / counts[g];
      ss_between += counts[g] * (mean_g - grand) * (mean_g - grand);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const double d = feature[i] - sums[labels[i]] / counts[labels[i]];
    ss_within += d * d;
  }
  const double df_between = static_cast<double>(groups - 1);
  const double df_within = static_cast<double>(n - groups);
  const double ms_between = ss_between / df_between;
  const double ms_within = ss_within / df_within;
  if (ms_within == 0.0)
    return ms_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return ms_between / ms_within;
}

double pearson_r(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n != b.size() || n < 2)
    throw std::invalid_argument("pearson_r: need two equal-length vectors, n >= 2");
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // constant input
  return sab / std::sqrt(saa * sbb);
}

ImportanceTable consensus_rank(
    const std::vector<std::string>& method_names,
    const std::vector<std::vector<double>>& score_vectors) {
  if (score_vectors.empty() || method_names.size() != score_vectors.size())
    throw std::invalid_argument("consensus_rank: method/vector count mismatch");
  const std::size_t d = score_vectors[0].size();
  for (const auto& v : score_vectors)
    if (v.size() != d)
      throw std::invalid_argument("consensus_rank: inconsistent vector lengths");

  ImportanceTable table;
  table.method_names = method_names;
  table.raw_scores = score_vectors;
  table.consensus.assign(d, 0.0);
  for (const auto& raw : score_vectors) {
    std::vector<double> v = raw;
    // infinity sentinels become the method's finite max
    double finite_max = -std::numeric_limits<double>::infinity();
    for (double s : v)
      if (std::isfinite(s)) finite_max = std::max(finite_max, s);
    if (!std::isfinite(finite_max)) finite_max = 0.0;
    for (double& s : v)
      if (!std::isfinite(s)) s = finite_max;

    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double span = *hi - *lo;
    std::vector<double> norm(d, 0.0);
    if (span > 0.0)
      for (std::size_t j = 0; j < d; ++j) norm[j] = (v[j] - *lo) / span;
    // else: constant method contributes 0 uniformly
    for (std::size_t j = 0; j < d; ++j) table.consensus[j] += norm[j];
    table.normalized.push_back(std::move(norm));
  }
  for (auto& c : table.consensus) c /= static_cast<double>(score_vectors.size());

  table.ranking.resize(d);
  std::iota(table.ranking.begin(), table.ranking.end(), 0);
  std::stable_sort(table.ranking.begin(), table.ranking.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (table.consensus[a] != table.consensus[b])
                       return table.consensus[a] > table.consensus[b];
                     return a < b;
                   });
  return table;
}

ImportanceTable five_method_importance(const std::vector<double>& x,
                                       std::size_t dim,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& rf_importance,
                                       const std::vector<double>& et_importance,
                                       std::size_t mi_bins) {
  const std::size_t n = labels.size();
  std::vector<double> label_enc(n);
  for (std::size_t i = 0; i < n; ++i) label_enc[i] = labels[i];

  std::vector<double> mi(dim), fstat(dim), corr(dim);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = x[i * dim + j];
    mi[j] = mutual_information(col, labels, mi_bins);
    fstat[j] = anova_f(col, labels);
    corr[j] = std::abs(pearson_r(col, label_enc));
  }
  return consensus_rank(
      {"random_forest", "extra_trees", "mutual_information", "anova_f",
       "pearson_abs_r"},
      {rf_importance, et_importance, mi, fstat, corr});
}

ShapleyReport shapley_mc(
    const std::function<double(const std::vector<double>&)>& predictor,
    const std::vector<double>& sample, const std::vector<double>& background_means,
    std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations < 1)
    throw std::invalid_argument("shapley_mc: need >= 1 permutation");
  const std::size_t d = sample.size();
  if (background_means.size() != d)
    throw std::invalid_argument("shapley_mc: background width mismatch");

  ShapleyReport rep;
  rep.permutations = n_permutations;
  rep.phi.assign(d, 0.0);
  rep.std_error.assign(d, 0.0);
  std::vector<double> sum_sq(d, 0.0);

  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> z = background_means;
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::shuffle(perm.begin(), perm.end(), rng);
    z = background_means;
    double prev = predictor(z);
    for (std::size_t j : perm) {
      z[j] = sample[j];
      const double cur = predictor(z);
      const double marginal = cur - prev;
      rep.phi[j] += marginal;
      sum_sq[j] += marginal * marginal;
      prev = cur;
    }
  }
  const double np = static_cast<double>(n_permutations);
  for (std::size_t j = 0; j < d; ++j) {
    rep.phi[j] /= np;
    const double var = sum_sq[j] / np - rep.phi[j] * rep.phi[j];
    rep.std_error[j] = n_permutations > 1 ? std::sqrt(std::max(0.0, var) / np) : 0.0;
  }
  rep.value_at_sample = predictor(sample);
  rep.value_at_background = predictor(background_means);
  const double total = std::accumulate(rep.phi.begin(), rep.phi.end(), 0.0);
  rep.efficiency_residual = total - (rep.value_at_sample - rep.value_at_background);
  return rep;
}

std::vector<double> shapley_exact(
    const std::function<double(const std::vector<double>&)>& predictor,
    const std::vector<double>& sample,
    const std::vector<double>& background_means) {
  const std::size_t d = sample.size();
  if (d > 20) throw std::invalid_argument("shapley_exact: too many features");
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * i;

  // Cache f over all 2^d coalitions.
  const std::size_t m = std::size_t{1} << d;
  std::vector<double> value(m);
  std::vector<double> z(d);
  for (std::size_t mask = 0; mask < m; ++mask) {
    for (std::size_t j = 0; j < d; ++j)
      z[j] = (mask >> j) & 1 ? sample[j] : background_means[j];
    value[mask] = predictor(z);
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t mask = 0; mask < m; ++mask) {
      if ((mask >> j) & 1) continue;
      const std::size_t s = static_cast<std::size_t>(__builtin_popcountll(mask));
      const double weight = fact[s] * fact[d - s - 1] / fact[d];
      phi[j] += weight * (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  return phi;
}

CorrelationMatrix correlation_matrix(const std::vector<double>& x,
                                     std::size_t dim,
                                     const std::vector<std::string>& names,
                                     const std::vector<int>& labels,
                                     std::size_t top_k) {
  if (top_k > dim)
    throw std::invalid_argument("correlation_matrix: top_k exceeds feature count");
  const std::size_t n = labels.size();
  std::vector<double> label_enc(n);
  for (std::size_t i = 0; i < n; ++i) label_enc[i] = labels[i];

  std::vector<double> abs_r(dim);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = x[i * dim + j];
    abs_r[j] = std::abs(pearson_r(col, label_enc));
  }
  std::vector<std::size_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (abs_r[a] != abs_r[b]) return abs_r[a] > abs_r[b];
    return a < b;
  });
  order.resize(top_k);

  CorrelationMatrix cm;
  cm.feature_indices = order;
  std::vector<std::vector<double>> cols(top_k + 1, std::vector<double>(n));
  for (std::size_t s = 0; s < top_k; ++s) {
    cm.names.push_back(names[order[s]]);
    for (std::size_t i = 0; i < n; ++i) cols[s][i] = x[i * dim + order[s]];
  }
  cm.names.push_back("label");
  cols[top_k] = label_enc;

  const std::size_t w = top_k + 1;
  cm.matrix.assign(w * w, 0.0);
  for (std::size_t a = 0; a < w; ++a) {
    cm.matrix[a * w + a] = 1.0;
    for (std::size_t b = a + 1; b < w; ++b) {
      const double r = pearson_r(cols[a], cols[b]);
      cm.matrix[a * w + b] = r;
      cm.matrix[b * w + a] = r;
    }
  }
  return cm;
}

void write_importance_csv(const ImportanceTable& table,
                          const std::vector<std::string>& feature_names,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "rank,feature";
  for (const auto& m : table.method_names) out << "," << m;
  out << ",consensus\n";
  char buf[40];
  for (std::size_t r = 0; r < table.ranking.size(); ++r) {
    const std::size_t j = table.ranking[r];
    out << (r + 1) << "," << feature_names[j];
    for (const auto& norm : table.normalized) {
      std::snprintf(buf, sizeof(buf), "%.17g", norm[j]);
      out << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", table.consensus[j]);
    out << "," << buf << "\n";
  }
}

void write_correlation_csv(const CorrelationMatrix& cm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const std::size_t w = cm.names.size();
  out << "name";
  for (const auto& n : cm.names) out << "," << n;
  out << "\n";
  char buf[40];
  for (std::size_t a = 0; a < w; ++a) {
    out << cm.names[a];
    for (std::size_t b = 0; b < w; ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g", cm.matrix[a * w + b]);
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace na
