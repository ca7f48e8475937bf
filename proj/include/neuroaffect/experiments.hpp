#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neuroaffect/data.hpp"
#include "neuroaffect/forest.hpp"
#include "neuroaffect/importance.hpp"
#include "neuroaffect/model.hpp"
#include "neuroaffect/stats.hpp"
#include "neuroaffect/train.hpp"

namespace na {

// Picks a (timesteps, channels) factorization of d for the sequence reshape:
// the largest channel count <= 16 that divides d.
std::pair<std::size_t, std::size_t> choose_seq_shape(std::size_t d);

struct ComparisonOptions {
  // Subset of {"rf", "et", "mlp", "standard", "enhanced"}.
  std::vector<std::string> roster = {"rf", "et", "mlp", "standard", "enhanced"};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  TrainSpec train;
  bool fast = false;  // shrunken hybrid specs + reduced epoch budget
  double inner_val_fraction = 0.1;
  std::size_t bootstrap_resamples = 1000;
  double ci_level = 0.95;
};

struct ModelRow {
  std::string name;
  std::vector<double> fold_accuracy;
  ConfusionMatrix pooled_confusion;
  Metrics pooled_metrics;
  double ci_lo = 0.0, ci_hi = 0.0;
  double overfit_gap = 0.0;
};

struct PairwiseTest {
  std::string model_a, model_b;
  double statistic = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
};

struct ComparisonResult {
  std::vector<ModelRow> rows;
  bool friedman_run = false;
  std::string friedman_note;  // set when skipped
  StatTestResult friedman_result;
  std::vector<PairwiseTest> pairwise;
  std::uint64_t splits_hash = 0;  // all models saw identical fold index sets
  std::vector<TrainTrace> traces;
  std::vector<std::string> trace_names;
};

ComparisonResult run_comparison(const FeatureTable& table,
                                const ComparisonOptions& options);

struct AblationRow {
  std::string removed_category;
  double mean_accuracy = 0.0;
  double drop = 0.0;  // full-set accuracy minus mean_accuracy
  std::size_t runs = 0;
};

struct AblationResult {
  double full_accuracy = 0.0;  // averaged over runs
  std::vector<AblationRow> rows;
  std::size_t runs = 0;
};

struct AblationOptions {
  std::size_t runs = 3;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  TrainSpec train;
  bool fast = true;
};

AblationResult run_ablation(const FeatureTable& table, const CategoryMap& categories,
                            const AblationOptions& options);

struct InterpretabilityOptions {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::size_t shap_samples = 500;
  std::size_t shap_permutations = 200;
  std::size_t correlation_top_k = 30;
  std::size_t mi_bins = 10;
  std::size_t n_trees = 100;
  // "rf" (default) or "enhanced": which model's predicted-class probability
  // the Shapley attribution explains.
  std::string shap_model = "rf";
  TrainSpec train;  // used only when shap_model == "enhanced"
  std::size_t train_epochs = 30;
};

struct InterpretabilityResult {
  ImportanceTable importance;
  std::vector<std::size_t> explained_samples;  // table row indices
  std::vector<ShapleyReport> shapley;
  CorrelationMatrix correlation;
};

InterpretabilityResult run_interpretability(const FeatureTable& table,
                                            const InterpretabilityOptions& options);

// Serialization to the run-directory artifact set. Every writer emits to a
// temp file and renames, so failures leave no partial output.
std::string comparison_to_json(const ComparisonResult& result,
                               const std::string& config_json);
std::string ablation_to_json(const AblationResult& result,
                             const std::string& config_json);
void write_ablation_csv(const AblationResult& result, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::vector<std::string>& class_names,
                         const std::string& path);
void write_ci_csv(const ComparisonResult& result, const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace na
