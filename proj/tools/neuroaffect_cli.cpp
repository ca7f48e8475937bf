// Batch CLI for the neuroaffect pipeline: synthetic data generation, model
// training, cross-validated comparison, category ablation, interpretability,
// and report rendering. Every command requires an explicit --seed and writes
// outputs atomically (temp file + rename).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuroaffect/data.hpp"
#include "neuroaffect/experiments.hpp"
#include "neuroaffect/forest.hpp"
#include "neuroaffect/importance.hpp"
#include "neuroaffect/model.hpp"
#include "neuroaffect/stats.hpp"
#include "neuroaffect/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Resolves a dataset path: as given, else relative to NEUROAFFECT_DATA_DIR.
std::string resolve_data_path(const std::string& path) {
  if (path.empty()) throw std::runtime_error("no dataset path given (use --data or config key data.path)");
  if (fs::exists(path)) return path;
  if (const char* root = std::getenv("NEUROAFFECT_DATA_DIR")) {
    fs::path candidate = fs::path(root) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  throw std::runtime_error("dataset not found: " + path);
}

// Merged view of config file keys and flag overrides. Flags win.
struct CliConfig {
  std::string data_path;
  double test_fraction = 0.2;
  na::AugmentSpec augment;
  std::vector<na::CategoryRule> rules = na::default_category_rules();
  bool rules_from_config = false;
};

CliConfig load_config(const std::string& path) {
  CliConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  auto bad = [&](const std::string& key, const std::string& why) {
    throw std::runtime_error("config key '" + key + "' invalid: " + why);
  };
  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("path")) {
      if (!d["path"].is_string()) bad("data.path", "expected string");
      cfg.data_path = d["path"].get<std::string>();
    }
    if (d.contains("test_fraction")) {
      if (!d["test_fraction"].is_number()) bad("data.test_fraction", "expected number");
      cfg.test_fraction = d["test_fraction"].get<double>();
      if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0)
        bad("data.test_fraction", "must be in (0,1)");
    }
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    if (a.contains("enabled")) {
      if (!a["enabled"].is_boolean()) bad("augment.enabled", "expected bool");
      cfg.augment.enabled = a["enabled"].get<bool>();
    }
    if (a.contains("noise_sigma")) {
      if (!a["noise_sigma"].is_number()) bad("augment.noise_sigma", "expected number");
      cfg.augment.noise_sigma = a["noise_sigma"].get<double>();
      if (cfg.augment.noise_sigma < 0.0) bad("augment.noise_sigma", "must be >= 0");
    }
    if (a.contains("scale_lo")) {
      if (!a["scale_lo"].is_number()) bad("augment.scale_lo", "expected number");
      cfg.augment.scale_lo = a["scale_lo"].get<double>();
    }
    if (a.contains("scale_hi")) {
      if (!a["scale_hi"].is_number()) bad("augment.scale_hi", "expected number");
      cfg.augment.scale_hi = a["scale_hi"].get<double>();
    }
    if (cfg.augment.scale_lo > cfg.augment.scale_hi)
      bad("augment.scale_lo", "must be <= augment.scale_hi");
  }
  if (j.contains("categories") && j["categories"].contains("rules")) {
    const auto& r = j["categories"]["rules"];
    if (!r.is_array()) bad("categories.rules", "expected array");
    cfg.rules.clear();
    cfg.rules_from_config = true;
    for (const auto& item : r) {
      if (!item.contains("pattern") || !item.contains("category"))
        bad("categories.rules", "each rule needs 'pattern' and 'category'");
      na::CategoryRule rule;
      rule.pattern = item["pattern"].get<std::string>();
      rule.category = na::category_from_name(item["category"].get<std::string>());
      cfg.rules.push_back(rule);
    }
  }
  return cfg;
}

json rules_to_json(const std::vector<na::CategoryRule>& rules) {
  json arr = json::array();
  for (const auto& r : rules)
    arr.push_back({{"pattern", r.pattern}, {"category", na::category_name(r.category)}});
  return arr;
}

std::vector<na::CategoryRule> rules_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file: " + path);
  json j;
  in >> j;
  const json& arr = j.is_array() ? j : j.at("rules");
  std::vector<na::CategoryRule> rules;
  for (const auto& item : arr) {
    na::CategoryRule r;
    r.pattern = item.at("pattern").get<std::string>();
    r.category = na::category_from_name(item.at("category").get<std::string>());
    rules.push_back(r);
  }
  return rules;
}

json metrics_to_json(const na::Metrics& m) {
  json per_class = json::array();
  for (int c = 0; c < 3; ++c)
    per_class.push_back({{"precision", m.per_class[c].precision},
                         {"recall", m.per_class[c].recall},
                         {"f1", m.per_class[c].f1},
                         {"support", m.per_class[c].support}});
  return {{"accuracy", m.accuracy},
          {"per_class", per_class},
          {"macro", {{"precision", m.macro_precision},
                     {"recall", m.macro_recall},
                     {"f1", m.macro_f1}}},
          {"weighted", {{"precision", m.weighted_precision},
                        {"recall", m.weighted_recall},
                        {"f1", m.weighted_f1}}}};
}

na::TrainSpec make_train_spec(std::uint64_t seed, bool fast, std::size_t epochs,
                              const na::AugmentSpec& aug) {
  na::TrainSpec ts;
  ts.seed = seed;
  ts.augment = aug;
  if (fast) {
    ts.epochs = 50;
    ts.patience = 15;
  }
  if (epochs > 0) ts.epochs = epochs;
  return ts;
}

std::vector<double> gather_rows(const std::vector<double>& x, std::size_t dim,
                                const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * dim);
  for (std::size_t i : idx)
    out.insert(out.end(), x.begin() + i * dim, x.begin() + (i + 1) * dim);
  return out;
}

// ---- subcommand bodies ---------------------------------------------------

struct SynthArgs {
  std::size_t n_per_class = 300;
  std::size_t dims = 120;
  std::string planted = "covariance";
  double separation = 5.0;
  std::uint64_t seed = 0;
  std::string out = "synth.csv";
};

int cmd_synth(const SynthArgs& a) {
  auto result = na::synth_generate(a.n_per_class, a.dims,
                                   na::category_from_name(a.planted),
                                   a.separation, a.seed);
  na::save_csv(result.table, a.out);
  json meta;
  meta["rules"] = rules_to_json(result.rules);
  meta["seed"] = a.seed;
  meta["planted"] = a.planted;
  meta["separation"] = a.separation;
  na::write_text_file(a.out + ".rules.json", meta.dump(2) + "\n");
  std::cout << "wrote " << result.table.n << " rows x " << result.table.d
            << " features to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string data_path;
  std::string model = "enhanced";
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  bool fast = false;
  std::size_t epochs = 0;  // 0 = profile default
};

int cmd_train(const TrainArgs& a) {
  CliConfig cfg = load_config(a.config_path);
  if (!a.data_path.empty()) cfg.data_path = a.data_path;
  na::FeatureTable table = na::load_csv(resolve_data_path(cfg.data_path));

  fs::create_directories(a.out_dir);
  na::SplitIndices split =
      na::stratified_split(table.labels, cfg.test_fraction, a.seed);
  na::Normalizer norm = na::fit_normalizer(table, split.train_idx);
  std::vector<double> x = table.values;
  na::apply_normalizer(norm, x);

  json report;
  report["model"] = a.model;
  report["seed"] = a.seed;
  report["fast"] = a.fast;
  report["test_fraction"] = cfg.test_fraction;
  report["n_samples"] = table.n;
  report["n_features"] = table.d;

  std::vector<int> predictions;
  if (a.model == "rf" || a.model == "et") {
    na::ForestConfig fc = a.model == "rf" ? na::random_forest_config(a.seed)
                                          : na::extra_trees_config(a.seed);
    auto xtr = gather_rows(x, table.d, split.train_idx);
    std::vector<int> ytr;
    for (std::size_t i : split.train_idx) ytr.push_back(table.labels[i]);
    na::Forest forest = na::fit_forest(xtr, table.d, ytr, fc);
    predictions = na::predict_labels(forest, x, split.test_idx, table.d);
  } else {
    // Inner validation subset carved from the training rows drives early
    // stopping; the test rows stay untouched until the end.
    std::vector<int> ytr;
    for (std::size_t i : split.train_idx) ytr.push_back(table.labels[i]);
    na::SplitIndices inner = na::stratified_split(ytr, 0.1, a.seed);
    std::vector<std::size_t> inner_train, inner_val;
    for (std::size_t i : inner.train_idx) inner_train.push_back(split.train_idx[i]);
    for (std::size_t i : inner.test_idx) inner_val.push_back(split.train_idx[i]);

    na::Network net;
    std::string spec_json;
    if (a.model == "mlp") {
      auto spec = na::mlp_baseline_spec(table.d);
      net = na::make_mlp_network(spec, a.seed);
      spec_json = json{{"kind", "mlp"}, {"input_dim", spec.input_dim}}.dump();
    } else if (a.model == "enhanced" || a.model == "standard") {
      auto [t, c] = na::choose_seq_shape(table.d);
      na::ModelSpec spec;
      if (a.fast) spec = na::fast_spec(table.d, t, c);
      else {
        spec = na::enhanced_spec();
        spec.input_dim = table.d;
        spec.seq_t = t;
        spec.seq_c = c;
      }
      if (a.model == "standard") {
        for (auto& b : spec.conv_blocks) b.residual = false;
        spec.lstm_layers = 1;
        spec.heads_stage1 = 0;
        spec.heads_stage2 = 8;
      }
      net = na::make_enhanced_network(spec, a.seed);
      spec_json = na::model_spec_to_json(spec);
    } else {
      throw std::runtime_error("unknown model: " + a.model +
                               " (expected enhanced|standard|mlp|rf|et)");
    }
    report["parameter_count"] = net.params.count_parameters();

    na::TrainSpec ts = make_train_spec(a.seed, a.fast, a.epochs, cfg.augment);
    na::TrainResult tr = na::train(net, x, table.labels, table.d, inner_train,
                                   inner_val, ts);
    na::write_trace_csv(tr.trace, (fs::path(a.out_dir) / "trace.csv").string());
    na::save_checkpoint((fs::path(a.out_dir) / "checkpoint.bin").string(),
                        spec_json.empty() ? "{}" : spec_json, net.params, a.seed);
    const auto& best = tr.trace.epochs[tr.trace.best_epoch];
    report["best_epoch"] = tr.trace.best_epoch;
    report["stop_reason"] = tr.trace.stop_reason;
    report["val_accuracy"] = best.val_acc;
    report["overfitting_gap"] = na::overfitting_gap(best.train_acc, best.val_acc);
    predictions = na::predict_labels(net, x, table.d, split.test_idx);
  }

  std::vector<int> actual;
  for (std::size_t i : split.test_idx) actual.push_back(table.labels[i]);
  auto cm = na::ConfusionMatrix::from_predictions(actual, predictions);
  na::Metrics m = na::metrics(cm);
  report["metrics"] = metrics_to_json(m);
  json confusion = json::array();
  for (int r = 0; r < 3; ++r) {
    json line = json::array();
    for (int c = 0; c < 3; ++c) line.push_back(cm.counts[r][c]);
    confusion.push_back(line);
  }
  report["confusion"] = confusion;
  report["accuracy"] = m.accuracy;
  na::write_text_file((fs::path(a.out_dir) / "metrics.json").string(),
                      report.dump(2) + "\n");
  std::cout << "model " << a.model << " test accuracy " << fmt(m.accuracy)
            << "\n";
  return 0;
}

struct CompareArgs {
  std::string config_path;
  std::string data_path;
  std::vector<std::string> models = {"rf", "et", "mlp", "standard", "enhanced"};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool fast = false;
  std::size_t epochs = 0;
  std::string out_dir = "run";
};

int cmd_compare(const CompareArgs& a) {
  CliConfig cfg = load_config(a.config_path);
  if (!a.data_path.empty()) cfg.data_path = a.data_path;
  na::FeatureTable table = na::load_csv(resolve_data_path(cfg.data_path));
  fs::create_directories(a.out_dir);

  na::ComparisonOptions opt;
  opt.roster = a.models;
  opt.folds = a.folds;
  opt.seed = a.seed;
  opt.fast = a.fast;
  opt.train = make_train_spec(a.seed, a.fast, a.epochs, cfg.augment);

  na::ComparisonResult result = na::run_comparison(table, opt);

  json config_snapshot = {{"command", "compare"},
                          {"data", cfg.data_path},
                          {"models", a.models},
                          {"folds", a.folds},
                          {"seed", a.seed},
                          {"fast", a.fast},
                          {"epochs", opt.train.epochs}};
  na::write_text_file((fs::path(a.out_dir) / "report.json").string(),
                      na::comparison_to_json(result, config_snapshot.dump()) + "\n");
  na::write_ci_csv(result, (fs::path(a.out_dir) / "ci.csv").string());
  for (const auto& row : result.rows)
    na::write_confusion_csv(
        row.pooled_confusion, table.class_names,
        (fs::path(a.out_dir) / ("confusion_" + row.name + ".csv")).string());
  for (std::size_t i = 0; i < result.traces.size(); ++i)
    na::write_trace_csv(
        result.traces[i],
        (fs::path(a.out_dir) / ("trace_" + result.trace_names[i] + ".csv")).string());

  // Table 1-style console summary.
  std::printf("%-10s %-8s %-8s %-8s %-8s\n", "Model", "Acc", "Prec", "Rec", "F1");
  for (const auto& row : result.rows)
    std::printf("%-10s %-8.4f %-8.4f %-8.4f %-8.4f\n", row.name.c_str(),
                row.pooled_metrics.accuracy, row.pooled_metrics.weighted_precision,
                row.pooled_metrics.weighted_recall, row.pooled_metrics.weighted_f1);
  if (result.friedman_run)
    std::printf("Friedman chi2 = %.4f, p = %.6f\n",
                result.friedman_result.statistic, result.friedman_result.p_value);
  else
    std::printf("Friedman skipped: %s\n", result.friedman_note.c_str());
  return 0;
}

struct AblateArgs {
  std::string config_path;
  std::string data_path;
  std::string rules_path;
  std::size_t runs = 3;
  std::uint64_t seed = 0;
  bool fast = true;
  std::size_t epochs = 0;
  double test_fraction = 0.2;
  std::string out_dir = "run";
};

int cmd_ablate(const AblateArgs& a) {
  CliConfig cfg = load_config(a.config_path);
  if (!a.data_path.empty()) cfg.data_path = a.data_path;
  na::FeatureTable table = na::load_csv(resolve_data_path(cfg.data_path));
  fs::create_directories(a.out_dir);

  std::vector<na::CategoryRule> rules = cfg.rules;
  if (!a.rules_path.empty()) rules = rules_from_file(a.rules_path);
  na::CategoryMap categories = na::categorize_features(table.feature_names, rules);

  na::AblationOptions opt;
  opt.runs = a.runs;
  opt.seed = a.seed;
  opt.fast = a.fast;
  opt.test_fraction = a.test_fraction;
  opt.train = make_train_spec(a.seed, a.fast, a.epochs, cfg.augment);

  na::AblationResult result = na::run_ablation(table, categories, opt);
  json config_snapshot = {{"command", "ablate"},
                          {"data", cfg.data_path},
                          {"runs", a.runs},
                          {"seed", a.seed},
                          {"fast", a.fast},
                          {"epochs", opt.train.epochs},
                          {"rules", rules_to_json(rules)}};
  na::write_text_file((fs::path(a.out_dir) / "ablation.json").string(),
                      na::ablation_to_json(result, config_snapshot.dump()) + "\n");
  na::write_ablation_csv(result, (fs::path(a.out_dir) / "ablation.csv").string());

  std::printf("%-14s %-12s %-12s\n", "Removed", "Acc. Drop", "Result Acc.");
  for (const auto& row : result.rows)
    std::printf("%-14s %-12.4f %-12.4f\n", row.removed_category.c_str(), row.drop,
                row.mean_accuracy);
  std::printf("%-14s %-12s %-12.4f\n", "(none)", "-", result.full_accuracy);
  return 0;
}

struct ExplainArgs {
  std::string config_path;
  std::string data_path;
  std::uint64_t seed = 0;
  std::size_t top_k = 15;
  std::size_t shap_samples = 20;
  std::size_t shap_permutations = 200;
  std::size_t corr_top_k = 30;
  std::size_t n_trees = 100;
  std::string shap_model = "rf";
  std::string out_dir = "run";
};

int cmd_explain(const ExplainArgs& a) {
  CliConfig cfg = load_config(a.config_path);
  if (!a.data_path.empty()) cfg.data_path = a.data_path;
  na::FeatureTable table = na::load_csv(resolve_data_path(cfg.data_path));
  fs::create_directories(a.out_dir);

  na::InterpretabilityOptions opt;
  opt.seed = a.seed;
  opt.test_fraction = cfg.test_fraction;
  opt.shap_samples = a.shap_samples;
  opt.shap_permutations = a.shap_permutations;
  opt.correlation_top_k = a.corr_top_k;
  opt.n_trees = a.n_trees;
  opt.shap_model = a.shap_model;
  opt.train.augment = cfg.augment;

  na::InterpretabilityResult result = na::run_interpretability(table, opt);
  na::write_importance_csv(result.importance, table.feature_names,
                           (fs::path(a.out_dir) / "importance.csv").string());
  na::write_correlation_csv(result.correlation,
                            (fs::path(a.out_dir) / "correlation.csv").string());

  json shap;
  shap["seed"] = a.seed;
  shap["permutations"] = a.shap_permutations;
  json reports = json::array();
  for (std::size_t i = 0; i < result.shapley.size(); ++i) {
    const auto& r = result.shapley[i];
    reports.push_back({{"sample_row", result.explained_samples[i]},
                       {"phi", r.phi},
                       {"std_error", r.std_error},
                       {"value_at_sample", r.value_at_sample},
                       {"value_at_background", r.value_at_background},
                       {"efficiency_residual", r.efficiency_residual}});
  }
  shap["samples"] = reports;
  na::write_text_file((fs::path(a.out_dir) / "shapley.json").string(),
                      shap.dump(2) + "\n");

  // Top-k consensus listing, both on stdout and as a small CSV.
  const std::size_t k = std::min(a.top_k, table.d);
  std::string top_csv = "rank,feature,consensus\n";
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t j = result.importance.ranking[r];
    std::printf("%2zu  %-24s %.6f\n", r + 1, table.feature_names[j].c_str(),
                result.importance.consensus[j]);
    top_csv += std::to_string(r + 1) + "," + table.feature_names[j] + "," +
               fmt(result.importance.consensus[j]) + "\n";
  }
  na::write_text_file((fs::path(a.out_dir) / "top_features.csv").string(), top_csv);
  return 0;
}

struct ReportArgs {
  std::string run_dir = "run";
  std::uint64_t seed = 0;
};

int cmd_report(const ReportArgs& a) {
  const fs::path dir(a.run_dir);
  const fs::path report_path = dir / "report.json";
  if (!fs::exists(report_path))
    throw std::runtime_error("missing prerequisite artifact: " +
                             report_path.string() + " (run `compare` first)");
  std::ifstream in(report_path);
  json report;
  in >> report;

  std::ostringstream text;
  json summary;
  summary["source"] = report_path.filename().string();

  text << "Model comparison\n";
  text << "----------------\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-8s %-8s %-8s %-8s %-17s\n", "Model",
                "Acc", "Prec", "Rec", "F1", "95% CI");
  text << line;
  json model_rows = json::array();
  for (const auto& row : report.at("models")) {
    const auto& m = row.at("metrics");
    std::snprintf(line, sizeof(line), "%-10s %-8.4f %-8.4f %-8.4f %-8.4f [%.4f, %.4f]\n",
                  row.at("model").get<std::string>().c_str(),
                  m.at("accuracy").get<double>(),
                  m.at("weighted").at("precision").get<double>(),
                  m.at("weighted").at("recall").get<double>(),
                  m.at("weighted").at("f1").get<double>(),
                  row.at("ci").at("lower").get<double>(),
                  row.at("ci").at("upper").get<double>());
    text << line;
    model_rows.push_back({{"model", row.at("model")},
                          {"accuracy", m.at("accuracy")},
                          {"f1", m.at("weighted").at("f1")},
                          {"ci", row.at("ci")}});
  }
  summary["models"] = model_rows;

  if (report.contains("friedman")) {
    std::snprintf(line, sizeof(line), "\nFriedman chi2 = %.4f, p = %.6f\n",
                  report["friedman"].at("statistic").get<double>(),
                  report["friedman"].at("p_value").get<double>());
    text << line;
    summary["friedman"] = report["friedman"];
    if (report.contains("pairwise_wilcoxon")) {
      text << "Pairwise Wilcoxon (Bonferroni-adjusted)\n";
      for (const auto& p : report["pairwise_wilcoxon"]) {
        std::snprintf(line, sizeof(line), "  %s vs %s: W=%.2f p=%.6f\n",
                      p.at("model_a").get<std::string>().c_str(),
                      p.at("model_b").get<std::string>().c_str(),
                      p.at("statistic").get<double>(),
                      p.at("p_bonferroni").get<double>());
        text << line;
      }
      summary["pairwise_wilcoxon"] = report["pairwise_wilcoxon"];
    }
  }

  const fs::path ablation_path = dir / "ablation.json";
  if (fs::exists(ablation_path)) {
    std::ifstream ain(ablation_path);
    json ablation;
    ain >> ablation;
    text << "\nCategory ablation\n";
    text << "-----------------\n";
    std::snprintf(line, sizeof(line), "%-14s %-12s %-12s\n", "Removed",
                  "Acc. Drop", "Result Acc.");
    text << line;
    for (const auto& row : ablation.at("rows")) {
      std::snprintf(line, sizeof(line), "%-14s %-12.4f %-12.4f\n",
                    row.at("removed_category").get<std::string>().c_str(),
                    row.at("accuracy_drop").get<double>(),
                    row.at("result_accuracy").get<double>());
      text << line;
    }
    summary["ablation"] = ablation.at("rows");
  }

  na::write_text_file((dir / "summary.txt").string(), text.str());
  na::write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neuroaffect: EEG emotion-classification laboratory"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic feature table");
  s->add_option("--n-per-class", synth.n_per_class, "samples per class");
  s->add_option("--dims", synth.dims, "feature count");
  s->add_option("--planted", synth.planted,
                "category carrying the class signal (statistical|frequency|covariance|eigenvalue)");
  s->add_option("--separation", synth.separation, "class mean separation");
  s->add_option("--seed", synth.seed, "RNG seed (required)")->required();
  s->add_option("--out", synth.out, "output CSV path");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one model on a dataset");
  t->add_option("--config", train.config_path, "JSON config file");
  t->add_option("--data", train.data_path, "dataset CSV (overrides config)");
  t->add_option("--model", train.model, "enhanced|standard|mlp|rf|et");
  t->add_option("--out-dir", train.out_dir, "output directory");
  t->add_option("--seed", train.seed, "RNG seed (required)")->required();
  t->add_flag("--fast", train.fast, "shrunken spec + reduced epochs");
  t->add_option("--epochs", train.epochs, "override epoch budget");

  CompareArgs compare;
  auto* c = app.add_subcommand("compare", "cross-validated model comparison");
  c->add_option("--config", compare.config_path, "JSON config file");
  c->add_option("--data", compare.data_path, "dataset CSV (overrides config)");
  c->add_option("--models", compare.models, "roster subset");
  c->add_option("--folds", compare.folds, "CV fold count");
  c->add_option("--seed", compare.seed, "RNG seed (required)")->required();
  c->add_flag("--fast", compare.fast, "shrunken spec + reduced epochs");
  c->add_option("--epochs", compare.epochs, "override epoch budget");
  c->add_option("--out-dir", compare.out_dir, "output directory");

  AblateArgs ablate;
  auto* b = app.add_subcommand("ablate", "feature-category ablation study");
  b->add_option("--config", ablate.config_path, "JSON config file");
  b->add_option("--data", ablate.data_path, "dataset CSV (overrides config)");
  b->add_option("--rules", ablate.rules_path, "category rules JSON");
  b->add_option("--runs", ablate.runs, "seeded repeats per setting");
  b->add_option("--seed", ablate.seed, "RNG seed (required)")->required();
  b->add_flag("--fast,!--no-fast", ablate.fast, "shrunken spec + reduced epochs");
  b->add_option("--epochs", ablate.epochs, "override epoch budget");
  b->add_option("--test-fraction", ablate.test_fraction, "held-out fraction");
  b->add_option("--out-dir", ablate.out_dir, "output directory");

  ExplainArgs explain;
  auto* e = app.add_subcommand("explain", "importance, Shapley, correlation");
  e->add_option("--config", explain.config_path, "JSON config file");
  e->add_option("--data", explain.data_path, "dataset CSV (overrides config)");
  e->add_option("--seed", explain.seed, "RNG seed (required)")->required();
  e->add_option("--top-k", explain.top_k, "consensus features listed");
  e->add_option("--shap-samples", explain.shap_samples, "test rows explained");
  e->add_option("--shap-permutations", explain.shap_permutations,
                "Monte-Carlo permutations per sample");
  e->add_option("--corr-top-k", explain.corr_top_k, "correlation matrix size");
  e->add_option("--trees", explain.n_trees, "forest size");
  e->add_option("--shap-model", explain.shap_model,
                "model the Shapley values explain (rf|enhanced)");
  e->add_option("--out-dir", explain.out_dir, "output directory");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "render run-directory summary");
  r->add_option("--run-dir", report.run_dir, "directory with prior outputs");
  r->add_option("--seed", report.seed, "RNG seed (required)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (t->parsed()) return cmd_train(train);
    if (c->parsed()) return cmd_compare(compare);
    if (b->parsed()) return cmd_ablate(ablate);
    if (e->parsed()) return cmd_explain(explain);
    if (r->parsed()) return cmd_report(report);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
