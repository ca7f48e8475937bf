#include "neuroaffect/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace na {

using json = nlohmann::json;

std::pair<std::size_t, std::size_t> choose_seq_shape(std::size_t d) {
  std::size_t best_c = 1;
  for (std::size_t c = 2; c <= 16; ++c)
    if (d % c == 0) best_c = c;
  return {d / best_c, best_c};
}

namespace {

std::uint64_t hash_indices(std::uint64_t h, const std::vector<std::size_t>& idx) {
  for (std::size_t v : idx) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::vector<double> gather_rows(const std::vector<double>& x, std::size_t dim,
                                const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * dim);
  for (std::size_t i : idx)
    out.insert(out.end(), x.begin() + i * dim, x.begin() + (i + 1) * dim);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

ModelSpec sized_hybrid_spec(std::size_t input_dim, bool fast, bool standard) {
  auto [t, c] = choose_seq_shape(input_dim);
  ModelSpec s;
  if (fast) s = fast_spec(input_dim, t, c);
  else {
    s = enhanced_spec();
    s.input_dim = input_dim;
    s.seq_t = t;
    s.seq_c = c;
  }
  if (standard) {
    for (auto& b : s.conv_blocks) b.residual = false;
    s.lstm_layers = 1;
    s.heads_stage1 = 0;
    s.heads_stage2 = 8;
  }
  return s;
}

struct FoldOutcome {
  std::vector<int> predictions;  // aligned with test_idx
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;   // best-checkpoint training accuracy
  double val_accuracy = 0.0;     // best-checkpoint validation accuracy
  TrainTrace trace;
  bool has_trace = false;
};

// Trains one roster entry on a fold's training rows (already normalized) and
// predicts the fold's test rows.
FoldOutcome run_model_on_fold(const std::string& name,
                              const std::vector<double>& x,
                              const std::vector<int>& labels, std::size_t dim,
                              const SplitIndices& fold,
                              const ComparisonOptions& opt, std::uint64_t seed) {
  FoldOutcome out;
  if (name == "rf" || name == "et") {
    ForestConfig cfg = name == "rf" ? random_forest_config(seed)
                                    : extra_trees_config(seed);
    auto xtr = gather_rows(x, dim, fold.train_idx);
    auto ytr = gather_labels(labels, fold.train_idx);
    Forest forest = fit_forest(xtr, dim, ytr, cfg);
    out.predictions = predict_labels(forest, x, fold.test_idx, dim);

    std::vector<std::size_t> all_train(fold.train_idx.size());
    std::iota(all_train.begin(), all_train.end(), 0);
    auto train_preds = predict_labels(forest, xtr, all_train, dim);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ytr.size(); ++i)
      if (train_preds[i] == ytr[i]) ++ok;
    out.train_accuracy = static_cast<double>(ok) / ytr.size();
    out.val_accuracy = out.train_accuracy;  // no held-out selection set
  } else {
    // Carve an inner validation subset out of the fold's training rows for
    // early stopping; the fold's test rows stay untouched.
    auto ytr_labels = gather_labels(labels, fold.train_idx);
    SplitIndices inner = stratified_split(ytr_labels, opt.inner_val_fraction, seed);
    std::vector<std::size_t> inner_train, inner_val;
    for (std::size_t i : inner.train_idx) inner_train.push_back(fold.train_idx[i]);
    for (std::size_t i : inner.test_idx) inner_val.push_back(fold.train_idx[i]);

    Network net;
    if (name == "mlp") net = make_mlp_network(mlp_baseline_spec(dim), seed);
    else if (name == "standard")
      net = make_enhanced_network(sized_hybrid_spec(dim, opt.fast, true), seed);
    else if (name == "enhanced")
      net = make_enhanced_network(sized_hybrid_spec(dim, opt.fast, false), seed);
    else
      throw std::invalid_argument("unknown roster model: " + name);

    TrainSpec ts = opt.train;
    ts.seed = seed;
    TrainResult tr = train(net, x, labels, dim, inner_train, inner_val, ts);
    out.trace = tr.trace;
    out.has_trace = true;
    const auto& best = tr.trace.epochs[tr.trace.best_epoch];
    out.train_accuracy = best.train_acc;
    out.val_accuracy = best.val_acc;
    out.predictions = predict_labels(net, x, dim, fold.test_idx);
  }
  auto ytest = gather_labels(labels, fold.test_idx);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ytest.size(); ++i)
    if (out.predictions[i] == ytest[i]) ++ok;
  out.test_accuracy = static_cast<double>(ok) / ytest.size();
  return out;
}

}  // namespace

ComparisonResult run_comparison(const FeatureTable& table,
                                const ComparisonOptions& options) {
  if (options.roster.empty())
    throw std::invalid_argument("run_comparison: empty roster");
  auto folds = kfold(table.labels, options.folds, options.seed);

  ComparisonResult result;
  result.splits_hash = 0;
  for (const auto& f : folds) {
    result.splits_hash = hash_indices(result.splits_hash, f.train_idx);
    result.splits_hash = hash_indices(result.splits_hash, f.test_idx);
  }

  std::vector<std::vector<double>> score_table;  // model x fold
  for (const auto& name : options.roster) {
    ModelRow row;
    row.name = name;
    std::vector<int> pooled_pred, pooled_actual;
    double gap_sum = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      // Per-fold normalization fitted on the fold's training rows only.
      Normalizer norm = fit_normalizer(table, folds[f].train_idx);
      std::vector<double> x = table.values;
      apply_normalizer(norm, x);
      const std::uint64_t fold_seed = options.seed * 1000003ull + f;
      FoldOutcome outcome;
      try {
        outcome = run_model_on_fold(name, x, table.labels, table.d, folds[f],
                                    options, fold_seed);
      } catch (const std::exception& e) {
        throw std::runtime_error("run_comparison: model '" + name +
                                 "' failed on fold " + std::to_string(f) + ": " +
                                 e.what());
      }
      row.fold_accuracy.push_back(outcome.test_accuracy);
      gap_sum += overfitting_gap(outcome.train_accuracy, outcome.val_accuracy);
      for (std::size_t i = 0; i < folds[f].test_idx.size(); ++i) {
        pooled_pred.push_back(outcome.predictions[i]);
        pooled_actual.push_back(table.labels[folds[f].test_idx[i]]);
      }
      if (outcome.has_trace) {
        result.traces.push_back(outcome.trace);
        result.trace_names.push_back(name + "_fold" + std::to_string(f));
      }
    }
    row.pooled_confusion =
        ConfusionMatrix::from_predictions(pooled_actual, pooled_pred);
    row.pooled_metrics = metrics(row.pooled_confusion);
    auto [lo, hi] = bootstrap_ci(pooled_pred, pooled_actual,
                                 options.bootstrap_resamples, options.ci_level,
                                 options.seed);
    row.ci_lo = lo;
    row.ci_hi = hi;
    row.overfit_gap = gap_sum / folds.size();
    score_table.push_back(row.fold_accuracy);
    result.rows.push_back(std::move(row));
  }

  if (options.roster.size() >= 2) {
    result.friedman_run = true;
    result.friedman_result = friedman(score_table);
    std::vector<double> raw_pvals;
    std::vector<PairwiseTest> pairs;
    for (std::size_t a = 0; a < options.roster.size(); ++a)
      for (std::size_t b = a + 1; b < options.roster.size(); ++b) {
        StatTestResult w = wilcoxon_signed_rank(score_table[a], score_table[b]);
        PairwiseTest pt;
        pt.model_a = options.roster[a];
        pt.model_b = options.roster[b];
        pt.statistic = w.statistic;
        pt.p_raw = w.p_value;
        pairs.push_back(pt);
        raw_pvals.push_back(w.p_value);
      }
    auto adjusted = bonferroni(raw_pvals, raw_pvals.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
      pairs[i].p_adjusted = adjusted[i];
    result.pairwise = std::move(pairs);
  } else {
    result.friedman_note = "insufficient methods: Friedman test requires >= 2";
  }
  return result;
}

AblationResult run_ablation(const FeatureTable& table, const CategoryMap& categories,
                            const AblationOptions& options) {
  auto present = categories.present_categories();
  if (present.size() < 2)
    throw std::invalid_argument("run_ablation: need >= 2 feature categories");

  auto train_and_score = [&](const std::vector<std::size_t>& features,
                             std::uint64_t seed) {
    if (features.empty())
      throw std::invalid_argument("run_ablation: removal leaves zero features");
    const std::size_t d = features.size();
    FeatureTable sub;
    sub.n = table.n;
    sub.d = d;
    sub.labels = table.labels;
    sub.values.resize(table.n * d);
    for (std::size_t i = 0; i < table.n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        sub.values[i * d + j] = table.at(i, features[j]);

    SplitIndices split = stratified_split(sub.labels, options.test_fraction, seed);
    Normalizer norm = fit_normalizer(sub, split.train_idx);
    std::vector<double> x = sub.values;
    apply_normalizer(norm, x);

    auto ytr_labels = gather_labels(sub.labels, split.train_idx);
    SplitIndices inner = stratified_split(ytr_labels, 0.1, seed);
    std::vector<std::size_t> inner_train, inner_val;
    for (std::size_t i : inner.train_idx) inner_train.push_back(split.train_idx[i]);
    for (std::size_t i : inner.test_idx) inner_val.push_back(split.train_idx[i]);

    Network net = make_enhanced_network(
        sized_hybrid_spec(d, options.fast, false), seed);
    TrainSpec ts = options.train;
    ts.seed = seed;
    train(net, x, sub.labels, d, inner_train, inner_val, ts);
    return accuracy_on(net, x, sub.labels, d, split.test_idx);
  };

  AblationResult result;
  result.runs = options.runs;
  std::vector<std::size_t> all_features(table.d);
  std::iota(all_features.begin(), all_features.end(), 0);

  for (std::size_t r = 0; r < options.runs; ++r)
    result.full_accuracy += train_and_score(all_features, options.seed + r);
  result.full_accuracy /= options.runs;

  for (FeatureCategory cat : present) {
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < table.d; ++j)
      if (categories.assignment[j] != cat) kept.push_back(j);
    AblationRow row;
    row.removed_category = category_name(cat);
    row.runs = options.runs;
    for (std::size_t r = 0; r < options.runs; ++r)
      row.mean_accuracy += train_and_score(kept, options.seed + r);
    row.mean_accuracy /= options.runs;
    row.drop = result.full_accuracy - row.mean_accuracy;
    result.rows.push_back(std::move(row));
  }
  return result;
}

InterpretabilityResult run_interpretability(const FeatureTable& table,
                                            const InterpretabilityOptions& options) {
  SplitIndices split =
      stratified_split(table.labels, options.test_fraction, options.seed);
  Normalizer norm = fit_normalizer(table, split.train_idx);
  std::vector<double> x = table.values;
  apply_normalizer(norm, x);

  auto xtr = gather_rows(x, table.d, split.train_idx);
  auto ytr = gather_labels(table.labels, split.train_idx);
  ForestConfig rf_cfg = random_forest_config(options.seed);
  rf_cfg.n_trees = options.n_trees;
  ForestConfig et_cfg = extra_trees_config(options.seed + 1);
  et_cfg.n_trees = options.n_trees;
  Forest rf = fit_forest(xtr, table.d, ytr, rf_cfg);
  Forest et = fit_forest(xtr, table.d, ytr, et_cfg);

  InterpretabilityResult result;
  result.importance = five_method_importance(
      xtr, table.d, ytr, impurity_importance(rf), impurity_importance(et),
      options.mi_bins);

  // Background reference: training-set feature means (zero after z-scoring
  // up to the epsilon in the denominator; computed, not assumed).
  std::vector<double> background(table.d, 0.0);
  for (std::size_t i : split.train_idx)
    for (std::size_t j = 0; j < table.d; ++j)
      background[j] += x[i * table.d + j];
  for (auto& b : background) b /= static_cast<double>(split.train_idx.size());

  // The explained model defaults to the forest; the deep model is selectable
  // at the cost of one fast training run plus slower Shapley evaluations.
  Network deep;
  if (options.shap_model == "enhanced") {
    auto ytr_labels = gather_labels(table.labels, split.train_idx);
    SplitIndices inner = stratified_split(ytr_labels, 0.1, options.seed);
    std::vector<std::size_t> inner_train, inner_val;
    for (std::size_t i : inner.train_idx) inner_train.push_back(split.train_idx[i]);
    for (std::size_t i : inner.test_idx) inner_val.push_back(split.train_idx[i]);
    deep = make_enhanced_network(sized_hybrid_spec(table.d, true, false),
                                 options.seed);
    TrainSpec ts = options.train;
    ts.seed = options.seed;
    ts.epochs = options.train_epochs;
    ts.patience = options.train_epochs;
    train(deep, x, table.labels, table.d, inner_train, inner_val, ts);
  } else if (options.shap_model != "rf") {
    throw std::invalid_argument("run_interpretability: shap_model must be rf or enhanced");
  }
  auto deep_proba = [&deep](const std::vector<double>& z) {
    NoGradGuard ng;
    std::mt19937 rng(0);
    Tensor xb({1, z.size()}, z);
    return deep.forward(deep.params, xb, false, rng).data();
  };

  const std::size_t n_explain =
      std::min(options.shap_samples, split.test_idx.size());
  for (std::size_t s = 0; s < n_explain; ++s) {
    const std::size_t row_idx = split.test_idx[s];
    std::vector<double> sample(x.begin() + row_idx * table.d,
                               x.begin() + (row_idx + 1) * table.d);
    std::function<double(const std::vector<double>&)> predictor;
    if (options.shap_model == "enhanced") {
      auto probs = deep_proba(sample);
      const int target = static_cast<int>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
      predictor = [&deep_proba, target](const std::vector<double>& z) {
        return deep_proba(z)[target];
      };
    } else {
      const int target = predict_label(rf, sample);
      predictor = [&rf, target](const std::vector<double>& z) {
        return predict_proba(rf, z)[target];
      };
    }
    result.explained_samples.push_back(row_idx);
    result.shapley.push_back(shapley_mc(predictor, sample, background,
                                        options.shap_permutations,
                                        options.seed + 100 + s));
  }

  const std::size_t top_k = std::min(options.correlation_top_k, table.d);
  result.correlation =
      correlation_matrix(x, table.d, table.feature_names, table.labels, top_k);
  return result;
}

// --- serialization --------------------------------------------------------

namespace {

json metrics_to_json(const Metrics& m) {
  json per_class = json::array();
  for (int c = 0; c < 3; ++c)
    per_class.push_back({{"precision", m.per_class[c].precision},
                         {"recall", m.per_class[c].recall},
                         {"f1", m.per_class[c].f1},
                         {"support", m.per_class[c].support},
                         {"zero_division", m.per_class[c].zero_division}});
  return {{"accuracy", m.accuracy},
          {"per_class", per_class},
          {"macro", {{"precision", m.macro_precision},
                     {"recall", m.macro_recall},
                     {"f1", m.macro_f1}}},
          {"weighted", {{"precision", m.weighted_precision},
                        {"recall", m.weighted_recall},
                        {"f1", m.weighted_f1}}}};
}

}  // namespace

std::string comparison_to_json(const ComparisonResult& result,
                               const std::string& config_json) {
  json j;
  j["schema_version"] = 1;
  j["config"] = json::parse(config_json);
  j["splits_hash"] = result.splits_hash;
  json rows = json::array();
  for (const auto& row : result.rows) {
    json confusion = json::array();
    for (int a = 0; a < 3; ++a) {
      json line = json::array();
      for (int b = 0; b < 3; ++b) line.push_back(row.pooled_confusion.counts[a][b]);
      confusion.push_back(line);
    }
    rows.push_back({{"model", row.name},
                    {"fold_accuracy", row.fold_accuracy},
                    {"metrics", metrics_to_json(row.pooled_metrics)},
                    {"confusion", confusion},
                    {"ci", {{"lower", row.ci_lo}, {"upper", row.ci_hi}}},
                    {"overfitting_gap", row.overfit_gap}});
  }
  j["models"] = rows;
  if (result.friedman_run) {
    j["friedman"] = {{"statistic", result.friedman_result.statistic},
                     {"p_value", result.friedman_result.p_value}};
    json pairs = json::array();
    for (const auto& p : result.pairwise)
      pairs.push_back({{"model_a", p.model_a},
                       {"model_b", p.model_b},
                       {"statistic", p.statistic},
                       {"p_raw", p.p_raw},
                       {"p_bonferroni", p.p_adjusted}});
    j["pairwise_wilcoxon"] = pairs;
  } else {
    j["friedman_skipped"] = result.friedman_note;
  }
  return j.dump(2);
}

std::string ablation_to_json(const AblationResult& result,
                             const std::string& config_json) {
  json j;
  j["schema_version"] = 1;
  j["config"] = json::parse(config_json);
  j["full_accuracy"] = result.full_accuracy;
  j["runs"] = result.runs;
  json rows = json::array();
  for (const auto& r : result.rows)
    rows.push_back({{"removed_category", r.removed_category},
                    {"result_accuracy", r.mean_accuracy},
                    {"accuracy_drop", r.drop},
                    {"runs", r.runs}});
  j["rows"] = rows;
  return j.dump(2);
}

void write_ablation_csv(const AblationResult& result, const std::string& path) {
  std::string content = "removed_category,acc_drop,result_acc,runs\n";
  char buf[160];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%zu\n",
                  r.removed_category.c_str(), r.drop, r.mean_accuracy, r.runs);
    content += buf;
  }
  std::snprintf(buf, sizeof(buf), "FULL,0,%.17g,%zu\n", result.full_accuracy,
                result.runs);
  content += buf;
  write_text_file(path, content);
}

void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names,
                         const std::string& path) {
  std::string content = "actual\\predicted";
  for (const auto& n : class_names) content += "," + n;
  content += "\n";
  for (int a = 0; a < 3; ++a) {
    content += class_names[a];
    for (int b = 0; b < 3; ++b)
      content += "," + std::to_string(cm.counts[a][b]);
    content += "\n";
  }
  write_text_file(path, content);
}

void write_ci_csv(const ComparisonResult& result, const std::string& path) {
  std::string content = "model,lower,upper\n";
  char buf[160];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", row.name.c_str(),
                  row.ci_lo, row.ci_hi);
    content += buf;
  }
  write_text_file(path, content);
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace na
