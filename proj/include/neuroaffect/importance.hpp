#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace na {

// Equal-frequency binning MI estimate in nats: I = H(Xb) - H(Xb | Y).
// Constant features score 0 by convention.
double mutual_information(const std::vector<double>& feature,
                          const std::vector<int>& labels, std::size_t n_bins = 10);

// One-way ANOVA F across classes. Zero within-group variance with nonzero
// between-group variance yields +infinity as a sentinel.
double anova_f(const std::vector<double>& feature, const std::vector<int>& labels);

// Sample Pearson correlation; 0 by convention for constant input.
double pearson_r(const std::vector<double>& a, const std::vector<double>& b);

struct ImportanceTable {
  std::vector<std::string> method_names;          // five methods, fixed order
  std::vector<std::vector<double>> raw_scores;    // per method, length D
  std::vector<std::vector<double>> normalized;    // min-max per method, in [0,1]
  std::vector<double> consensus;                  // mean of normalized vectors
  std::vector<std::size_t> ranking;               // feature idx, descending consensus
};

// Min-max normalizes each method vector (infinity sentinels mapped to the
// method's finite max first; an entirely constant method contributes 0
// uniformly), averages into the consensus, and ranks descending with ties
// broken by feature index.
ImportanceTable consensus_rank(
    const std::vector<std::string>& method_names,
    const std::vector<std::vector<double>>& score_vectors);

// Computes all five per-feature relevance scores against the label:
// forest importance x2 (pre-fitted), MI, ANOVA F, |Pearson r|.
ImportanceTable five_method_importance(const std::vector<double>& x,
                                       std::size_t dim,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& rf_importance,
                                       const std::vector<double>& et_importance,
                                       std::size_t mi_bins = 10);

struct ShapleyReport {
  std::vector<double> phi;          // per-feature attribution
  std::vector<double> std_error;    // Monte-Carlo SE per feature
  std::size_t permutations = 0;
  double value_at_sample = 0.0;     // f(x)
  double value_at_background = 0.0; // f(background means)
  double efficiency_residual = 0.0; // sum(phi) - (f(x) - f(background))
};

// Castro-style permutation-sampling Shapley estimate of a scalar predictor.
// Masked features are replaced by the background expectation values.
ShapleyReport shapley_mc(
    const std::function<double(const std::vector<double>&)>& predictor,
    const std::vector<double>& sample, const std::vector<double>& background_means,
    std::size_t n_permutations, std::uint64_t seed);

// Exact Shapley by exhaustive coalition enumeration; feasible for D <= ~20.
std::vector<double> shapley_exact(
    const std::function<double(const std::vector<double>&)>& predictor,
    const std::vector<double>& sample, const std::vector<double>& background_means);

struct CorrelationMatrix {
  std::vector<std::string> names;   // k selected features + "label"
  std::vector<std::size_t> feature_indices;
  std::vector<double> matrix;       // row-major (k+1) x (k+1)
};

// Pairwise Pearson matrix over the top_k features by |r with label|, plus
// the label column itself.
CorrelationMatrix correlation_matrix(const std::vector<double>& x,
                                     std::size_t dim,
                                     const std::vector<std::string>& names,
                                     const std::vector<int>& labels,
                                     std::size_t top_k);

void write_importance_csv(const ImportanceTable& table,
                          const std::vector<std::string>& feature_names,
                          const std::string& path);
void write_correlation_csv(const CorrelationMatrix& cm, const std::string& path);

}  // namespace na
