#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace na {

// Sample-major matrix of real-valued EEG features with named columns and
// class labels. Immutable after construction; share freely across threads.
struct FeatureTable {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;        // row-major n x d
  std::vector<std::string> feature_names;
  std::vector<int> labels;           // in {0,1,2}
  std::vector<std::string> class_names = {"Neutral", "Positive", "Negative"};

  double at(std::size_t row, std::size_t col) const {
    return values[row * d + col];
  }
  std::vector<double> row(std::size_t i) const {
    return {values.begin() + i * d, values.begin() + (i + 1) * d};
  }
};

// Per-feature affine transform (x - mu) / (sigma + eps), fitted on training
// rows only. Population sigma (divide by N).
struct Normalizer {
  std::vector<double> means;
  std::vector<double> stds;
  double epsilon = 1e-8;
};

struct SplitIndices {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
};

enum class FeatureCategory { Statistical, Frequency, Covariance, Eigenvalue, Other };

const char* category_name(FeatureCategory c);
FeatureCategory category_from_name(const std::string& s);

struct CategoryRule {
  std::string pattern;  // substring match, first rule wins
  FeatureCategory category;
};

struct CategoryMap {
  std::vector<FeatureCategory> assignment;  // one per feature

  std::vector<std::size_t> indices_of(FeatureCategory c) const;
  std::vector<FeatureCategory> present_categories() const;
};

// Best-effort rules for the public dataset's column naming; overrideable
// through configuration.
std::vector<CategoryRule> default_category_rules();

// CSV: UTF-8, comma separated, header row, label column named `label`.
// Textual labels NEUTRAL/POSITIVE/NEGATIVE (case-insensitive) map to 0/1/2.
// Malformed cells are reported with their row and column.
FeatureTable load_csv(const std::string& path);
void save_csv(const FeatureTable& table, const std::string& path);

Normalizer fit_normalizer(const FeatureTable& table,
                          const std::vector<std::size_t>& train_idx);
// In-place transform of a row-major matrix with `d` columns.
void apply_normalizer(const Normalizer& norm, std::vector<double>& rows);

// Largest-remainder per-class allocation; deterministic given seed.
SplitIndices stratified_split(const std::vector<int>& labels,
                              double test_fraction, std::uint64_t seed);

std::vector<SplitIndices> kfold(const std::vector<int>& labels, std::size_t k,
                                std::uint64_t seed);

// out = in * s + n, s ~ U[lo,hi] per row, n ~ N(0, sigma^2) per element.
void augment(std::vector<double>& rows, std::size_t d, double noise_sigma,
             double scale_lo, double scale_hi, std::mt19937& rng);

struct SynthResult {
  FeatureTable table;
  CategoryMap categories;
  std::vector<CategoryRule> rules;
};

// Three Gaussian class clusters whose mean separation lives only in features
// of the planted category; all other categories are unit noise.
SynthResult synth_generate(std::size_t n_per_class, std::size_t d,
                           FeatureCategory planted, double separation,
                           std::uint64_t seed);

CategoryMap categorize_features(const std::vector<std::string>& names,
                                const std::vector<CategoryRule>& rules);

}  // namespace na
