#pragma once

#include <cstdint>
#include <vector>

namespace na {

// Axis-aligned decision tree stored as a flat node array. Internal nodes
// carry the split and the impurity bookkeeping used for importance; leaves
// carry class counts.
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::ptrdiff_t left = -1;
  std::ptrdiff_t right = -1;
  double impurity_decrease = 0.0;  // sample-weighted, already scaled by n/N
  std::size_t samples = 0;
  std::vector<double> class_counts;  // leaves only
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestConfig {
  std::size_t n_trees = 100;
  bool bootstrap = true;             // RF: on, ET: off
  bool randomized_threshold = false; // ET: on
  std::size_t max_depth = 0;         // 0 = unlimited
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  // 0 = floor(sqrt(D)) resampled per node; otherwise a fixed count.
  std::size_t features_per_split = 0;
  std::uint64_t seed = 0;
};

ForestConfig random_forest_config(std::uint64_t seed);
ForestConfig extra_trees_config(std::uint64_t seed);

struct Forest {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  ForestConfig config;
};

// 1 - sum (c_k / n)^2 over a class-count vector.
double gini(const std::vector<double>& counts);

Forest fit_forest(const std::vector<double>& x, std::size_t dim,
                  const std::vector<int>& labels, const ForestConfig& config);

// Average of per-tree leaf class distributions.
std::vector<double> predict_proba(const Forest& forest,
                                  const std::vector<double>& row);
// Argmax of predict_proba; ties break to the lowest class id.
int predict_label(const Forest& forest, const std::vector<double>& row);
std::vector<int> predict_labels(const Forest& forest,
                                const std::vector<double>& x,
                                const std::vector<std::size_t>& idx,
                                std::size_t dim);

// Per-feature impurity decreases averaged over trees, normalized to sum 1.
// All-zero when no tree ever split.
std::vector<double> impurity_importance(const Forest& forest);

}  // namespace na
