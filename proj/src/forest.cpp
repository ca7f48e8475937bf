#include "neuroaffect/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace na {

ForestConfig random_forest_config(std::uint64_t seed) {
  ForestConfig c;
  c.bootstrap = true;
  c.randomized_threshold = false;
  c.seed = seed;
  return c;
}

ForestConfig extra_trees_config(std::uint64_t seed) {
  ForestConfig c;
  c.bootstrap = false;
  c.randomized_threshold = true;
  c.seed = seed;
  return c;
}

double gini(const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw std::invalid_argument("gini: negative count");
    n += c;
  }
  if (n <= 0.0) throw std::invalid_argument("gini: all-zero counts");
  double sq = 0.0;
  for (double c : counts) sq += (c / n) * (c / n);
  return 1.0 - sq;
}

namespace {

struct Builder {
  const std::vector<double>& x;
  std::size_t dim;
  const std::vector<int>& labels;
  const ForestConfig& cfg;
  std::size_t n_classes;
  std::size_t n_total;  // samples this tree was fit on (for n/N weighting)
  std::mt19937 rng;
  Tree tree;

  std::vector<double> count_classes(const std::vector<std::size_t>& idx) const {
    std::vector<double> counts(n_classes, 0.0);
    for (std::size_t i : idx) counts[labels[i]] += 1.0;
    return counts;
  }

  std::size_t make_leaf(const std::vector<std::size_t>& idx) {
    TreeNode node;
    node.leaf = true;
    node.samples = idx.size();
    node.class_counts = count_classes(idx);
    tree.nodes.push_back(std::move(node));
    return tree.nodes.size() - 1;
  }

  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
    bool found = false;
  };

  // Candidate features: floor(sqrt(D)) without replacement, resampled per node.
  std::vector<std::size_t> sample_features() {
    std::size_t k = cfg.features_per_split;
    if (k == 0) k = std::max<std::size_t>(1, (std::size_t)std::floor(std::sqrt((double)dim)));
    k = std::min(k, dim);
    std::vector<std::size_t> all(dim);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, dim - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());  // deterministic tie-breaking order
    return all;
  }

  double split_gain(const std::vector<std::size_t>& idx, std::size_t feature,
                    double threshold, double parent_impurity) const {
    std::vector<double> left(n_classes, 0.0), right(n_classes, 0.0);
    std::size_t nl = 0, nr = 0;
    for (std::size_t i : idx) {
      if (x[i * dim + feature] <= threshold) { left[labels[i]] += 1.0; ++nl; }
      else { right[labels[i]] += 1.0; ++nr; }
    }
    if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) return -1.0;
    const double n = static_cast<double>(idx.size());
    return parent_impurity - (nl / n) * gini(left) - (nr / n) * gini(right);
  }

  Split best_split(const std::vector<std::size_t>& idx, double parent_impurity) {
    Split best;
    for (std::size_t f : sample_features()) {
      if (cfg.randomized_threshold) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i : idx) {
          lo = std::min(lo, x[i * dim + f]);
          hi = std::max(hi, x[i * dim + f]);
        }
        if (lo >= hi) continue;
        std::uniform_real_distribution<double> dist(lo, hi);
        const double thr = dist(rng);
        const double gain = split_gain(idx, f, thr, parent_impurity);
        if (gain > best.gain + 1e-15 && gain > 0.0) {
          best = {f, thr, gain, true};
        }
      } else {
        // midpoints between consecutive distinct sorted values
        std::vector<double> vals;
        vals.reserve(idx.size());
        for (std::size_t i : idx) vals.push_back(x[i * dim + f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
          const double thr = 0.5 * (vals[v] + vals[v + 1]);
          const double gain = split_gain(idx, f, thr, parent_impurity);
          // ties break to lowest feature index, then lowest threshold
          if (gain > best.gain + 1e-15 && gain > 0.0) best = {f, thr, gain, true};
        }
      }
    }
    return best;
  }

  std::size_t build(const std::vector<std::size_t>& idx, std::size_t depth) {
    auto counts = count_classes(idx);
    const double impurity = gini(counts);
    const bool depth_ok = cfg.max_depth == 0 || depth < cfg.max_depth;
    if (impurity <= 0.0 || idx.size() < cfg.min_samples_split || !depth_ok)
      return make_leaf(idx);

    Split split = best_split(idx, impurity);
    if (!split.found) return make_leaf(idx);

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      if (x[i * dim + split.feature] <= split.threshold) left.push_back(i);
      else right.push_back(i);
    }
    TreeNode node;
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.samples = idx.size();
    node.impurity_decrease =
        split.gain * static_cast<double>(idx.size()) / static_cast<double>(n_total);
    tree.nodes.push_back(std::move(node));
    const std::size_t self = tree.nodes.size() - 1;
    const std::size_t l = build(left, depth + 1);
    const std::size_t r = build(right, depth + 1);
    tree.nodes[self].left = static_cast<std::ptrdiff_t>(l);
    tree.nodes[self].right = static_cast<std::ptrdiff_t>(r);
    return self;
  }
};

const TreeNode& descend(const Tree& tree, const std::vector<double>& row) {
  std::size_t at = 0;
  while (!tree.nodes[at].leaf) {
    const auto& n = tree.nodes[at];
    at = static_cast<std::size_t>(row[n.feature] <= n.threshold ? n.left : n.right);
  }
  return tree.nodes[at];
}

}  // namespace

Forest fit_forest(const std::vector<double>& x, std::size_t dim,
                  const std::vector<int>& labels, const ForestConfig& config) {
  if (labels.empty() || dim == 0)
    throw std::invalid_argument("fit_forest: empty input");
  if (config.n_trees < 1)
    throw std::invalid_argument("fit_forest: n_trees must be >= 1");
  const std::size_t n = labels.size();
  if (x.size() != n * dim)
    throw std::invalid_argument("fit_forest: data size mismatch");
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

  Forest forest;
  forest.n_features = dim;
  forest.n_classes = n_classes;
  forest.config = config;
  std::mt19937 seed_rng(static_cast<std::uint32_t>(config.seed));
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    const std::uint32_t tree_seed = seed_rng();
    std::vector<std::size_t> idx;
    if (config.bootstrap) {
      std::mt19937 boot(tree_seed ^ 0x5bd1e995u);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      idx.resize(n);
      for (auto& i : idx) i = pick(boot);
    } else {
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0);
    }
    Builder b{x, dim, labels, config, n_classes, idx.size(),
              std::mt19937(tree_seed), Tree{}};
    b.build(idx, 0);
    forest.trees.push_back(std::move(b.tree));
  }
  return forest;
}

std::vector<double> predict_proba(const Forest& forest,
                                  const std::vector<double>& row) {
  if (row.size() != forest.n_features)
    throw std::invalid_argument("predict_proba: row width mismatch");
  std::vector<double> probs(forest.n_classes, 0.0);
  for (const auto& tree : forest.trees) {
    const auto& leaf = descend(tree, row);
    double total = 0.0;
    for (double c : leaf.class_counts) total += c;
    for (std::size_t k = 0; k < forest.n_classes; ++k)
      probs[k] += leaf.class_counts[k] / total;
  }
  for (auto& p : probs) p /= static_cast<double>(forest.trees.size());
  return probs;
}

int predict_label(const Forest& forest, const std::vector<double>& row) {
  const auto probs = predict_proba(forest, row);
  std::size_t arg = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[arg]) arg = k;
  return static_cast<int>(arg);
}

std::vector<int> predict_labels(const Forest& forest,
                                const std::vector<double>& x,
                                const std::vector<std::size_t>& idx,
                                std::size_t dim) {
  std::vector<int> out;
  out.reserve(idx.size());
  std::vector<double> row(dim);
  for (std::size_t i : idx) {
    std::copy(x.begin() + i * dim, x.begin() + (i + 1) * dim, row.begin());
    out.push_back(predict_label(forest, row));
  }
  return out;
}

std::vector<double> impurity_importance(const Forest& forest) {
  std::vector<double> importance(forest.n_features, 0.0);
  for (const auto& tree : forest.trees)
    for (const auto& node : tree.nodes)
      if (!node.leaf) importance[node.feature] += node.impurity_decrease;
  for (auto& v : importance) v /= static_cast<double>(forest.trees.size());
  const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
  if (total > 0.0)
    for (auto& v : importance) v /= total;
  return importance;
}

}  // namespace na
