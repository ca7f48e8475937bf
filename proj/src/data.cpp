#include "neuroaffect/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace na {

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

[[noreturn]] void cell_error(const std::string& what, std::size_t row,
                             const std::string& col) {
  throw std::runtime_error(what + " at row " + std::to_string(row) +
                           ", column '" + col + "'");
}

}  // namespace

const char* category_name(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::Statistical: return "statistical";
    case FeatureCategory::Frequency: return "frequency";
    case FeatureCategory::Covariance: return "covariance";
    case FeatureCategory::Eigenvalue: return "eigenvalue";
    case FeatureCategory::Other: return "other";
  }
  return "other";
}

FeatureCategory category_from_name(const std::string& s) {
  if (s == "statistical") return FeatureCategory::Statistical;
  if (s == "frequency") return FeatureCategory::Frequency;
  if (s == "covariance") return FeatureCategory::Covariance;
  if (s == "eigenvalue") return FeatureCategory::Eigenvalue;
  if (s == "other") return FeatureCategory::Other;
  throw std::invalid_argument("unknown feature category: " + s);
}

std::vector<std::size_t> CategoryMap::indices_of(FeatureCategory c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == c) out.push_back(i);
  return out;
}

std::vector<FeatureCategory> CategoryMap::present_categories() const {
  std::vector<FeatureCategory> out;
  for (FeatureCategory c :
       {FeatureCategory::Statistical, FeatureCategory::Frequency,
        FeatureCategory::Covariance, FeatureCategory::Eigenvalue,
        FeatureCategory::Other})
    if (!indices_of(c).empty()) out.push_back(c);
  return out;
}

std::vector<CategoryRule> default_category_rules() {
  return {
      {"covmat", FeatureCategory::Covariance},
      {"cov", FeatureCategory::Covariance},
      {"eig", FeatureCategory::Eigenvalue},
      {"fft", FeatureCategory::Frequency},
      {"freq", FeatureCategory::Frequency},
      {"psd", FeatureCategory::Frequency},
      {"entropy", FeatureCategory::Frequency},
      {"mean", FeatureCategory::Statistical},
      {"stddev", FeatureCategory::Statistical},
      {"std", FeatureCategory::Statistical},
      {"moment", FeatureCategory::Statistical},
      {"skew", FeatureCategory::Statistical},
      {"kurt", FeatureCategory::Statistical},
      {"min", FeatureCategory::Statistical},
      {"max", FeatureCategory::Statistical},
      {"var", FeatureCategory::Statistical},
  };
}

FeatureTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  auto header = split_csv_line(line);
  std::ptrdiff_t label_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == "label") label_col = static_cast<std::ptrdiff_t>(j);
  if (label_col < 0)
    throw std::runtime_error("missing label column in " + path);

  FeatureTable t;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (static_cast<std::ptrdiff_t>(j) != label_col)
      t.feature_names.push_back(header[j]);
  t.d = t.feature_names.size();
  if (t.d == 0) throw std::runtime_error("no feature columns in " + path);
  {
    auto sorted = t.feature_names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::runtime_error("duplicate feature names in " + path);
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (static_cast<std::ptrdiff_t>(j) == label_col) {
        const std::string u = upper(cells[j]);
        if (u == "NEUTRAL") t.labels.push_back(0);
        else if (u == "POSITIVE") t.labels.push_back(1);
        else if (u == "NEGATIVE") t.labels.push_back(2);
        else cell_error("unknown label '" + cells[j] + "'", row, header[j]);
      } else {
        double v = 0.0;
        const char* b = cells[j].data();
        auto [ptr, ec] = std::from_chars(b, b + cells[j].size(), v);
        if (ec != std::errc() || ptr != b + cells[j].size())
          cell_error("non-numeric cell '" + cells[j] + "'", row, header[j]);
        if (!std::isfinite(v))
          cell_error("non-finite value '" + cells[j] + "'", row, header[j]);
        t.values.push_back(v);
      }
    }
  }
  t.n = t.labels.size();
  if (t.n == 0) throw std::runtime_error("no data rows in " + path);
  return t;
}

void save_csv(const FeatureTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t j = 0; j < table.d; ++j) out << table.feature_names[j] << ",";
  out << "label\n";
  char buf[40];
  static const char* kLabelText[3] = {"NEUTRAL", "POSITIVE", "NEGATIVE"};
  for (std::size_t i = 0; i < table.n; ++i) {
    for (std::size_t j = 0; j < table.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.at(i, j));
      out << buf << ",";
    }
    out << kLabelText[table.labels[i]] << "\n";
  }
}

Normalizer fit_normalizer(const FeatureTable& table,
                          const std::vector<std::size_t>& train_idx) {
  if (train_idx.empty())
    throw std::invalid_argument("fit_normalizer: empty training index set");
  Normalizer norm;
  norm.means.assign(table.d, 0.0);
  norm.stds.assign(table.d, 0.0);
  const double n = static_cast<double>(train_idx.size());
  for (std::size_t i : train_idx)
    for (std::size_t j = 0; j < table.d; ++j)
      norm.means[j] += table.at(i, j);
  for (auto& m : norm.means) m /= n;
  for (std::size_t i : train_idx)
    for (std::size_t j = 0; j < table.d; ++j) {
      const double dlt = table.at(i, j) - norm.means[j];
      norm.stds[j] += dlt * dlt;
    }
  for (auto& s : norm.stds) s = std::sqrt(s / n);
  return norm;
}

void apply_normalizer(const Normalizer& norm, std::vector<double>& rows) {
  const std::size_t d = norm.means.size();
  if (rows.size() % d != 0)
    throw std::invalid_argument("apply_normalizer: width mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t j = i % d;
    rows[i] = (rows[i] - norm.means[j]) / (norm.stds[j] + norm.epsilon);
  }
}

SplitIndices stratified_split(const std::vector<int>& labels,
                              double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("stratified_split: test_fraction must be in (0,1)");
  const std::size_t n = labels.size();
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(labels[i]);
    if (by_class.size() <= c) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  for (const auto& cls : by_class)
    if (cls.size() < 2)
      throw std::invalid_argument("stratified_split: class with fewer than 2 samples");

  // Largest-remainder allocation of the total test count across classes.
  const std::size_t total_test =
      static_cast<std::size_t>(std::llround(n * test_fraction));
  std::vector<std::size_t> base(by_class.size());
  std::vector<std::pair<double, std::size_t>> rem;  // (-remainder, class)
  std::size_t allotted = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = by_class[c].size() * test_fraction;
    base[c] = static_cast<std::size_t>(std::floor(exact));
    allotted += base[c];
    rem.push_back({-(exact - base[c]), c});
  }
  std::sort(rem.begin(), rem.end());
  for (std::size_t k = 0; allotted < total_test && k < rem.size(); ++k, ++allotted)
    ++base[rem[k].second];
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (base[c] == 0 || base[c] >= by_class[c].size())
      throw std::invalid_argument(
          "stratified_split: class " + std::to_string(c) +
          " too small for both sides of the split");

  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    out.test_idx.insert(out.test_idx.end(), idx.begin(), idx.begin() + base[c]);
    out.train_idx.insert(out.train_idx.end(), idx.begin() + base[c], idx.end());
  }
  std::sort(out.train_idx.begin(), out.train_idx.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  return out;
}

std::vector<SplitIndices> kfold(const std::vector<int>& labels, std::size_t k,
                                std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(labels[i]);
    if (by_class.size() <= c) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  for (const auto& cls : by_class)
    if (cls.size() < k)
      throw std::invalid_argument("kfold: k exceeds smallest class count");

  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::vector<std::vector<std::size_t>> folds(k);
  for (auto& cls : by_class) {
    auto idx = cls;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[i % k].push_back(idx[i]);
  }
  std::vector<SplitIndices> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    out[f].test_idx = folds[f];
    std::sort(out[f].test_idx.begin(), out[f].test_idx.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f)
        out[f].train_idx.insert(out[f].train_idx.end(), folds[g].begin(),
                                folds[g].end());
    std::sort(out[f].train_idx.begin(), out[f].train_idx.end());
  }
  return out;
}

void augment(std::vector<double>& rows, std::size_t d, double noise_sigma,
             double scale_lo, double scale_hi, std::mt19937& rng) {
  if (scale_lo > scale_hi)
    throw std::invalid_argument("augment: scale_lo > scale_hi");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("augment: noise_sigma must be >= 0");
  std::uniform_real_distribution<double> scale_dist(scale_lo, scale_hi);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
  const std::size_t n = rows.size() / d;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = scale_dist(rng);
    for (std::size_t j = 0; j < d; ++j) {
      double v = rows[i * d + j] * s;
      if (noise_sigma > 0.0) v += noise(rng);
      rows[i * d + j] = v;
    }
  }
}

SynthResult synth_generate(std::size_t n_per_class, std::size_t d,
                           FeatureCategory planted, double separation,
                           std::uint64_t seed) {
  if (d < 8) throw std::invalid_argument("synth_generate: d must be >= 8");
  if (n_per_class < 10)
    throw std::invalid_argument("synth_generate: n_per_class must be >= 10");

  SynthResult r;
  r.rules = {{"covmat", FeatureCategory::Covariance},
             {"eig", FeatureCategory::Eigenvalue},
             {"fft", FeatureCategory::Frequency},
             {"mean", FeatureCategory::Statistical}};

  // Contiguous quarter blocks per category; remainder falls into "other".
  const std::size_t per_cat = d / 4;
  auto& names = r.table.feature_names;
  for (std::size_t j = 0; j < d; ++j) {
    if (j < per_cat) names.push_back("mean_" + std::to_string(j));
    else if (j < 2 * per_cat) names.push_back("fft_" + std::to_string(j));
    else if (j < 3 * per_cat) names.push_back("covmat_" + std::to_string(j));
    else if (j < 4 * per_cat) names.push_back("eig_" + std::to_string(j));
    else names.push_back("feat_" + std::to_string(j));
  }
  r.categories = categorize_features(names, r.rules);

  r.table.n = 3 * n_per_class;
  r.table.d = d;
  r.table.values.assign(r.table.n * d, 0.0);
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t row = 0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      r.table.labels.push_back(c);
      for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        if (r.categories.assignment[j] == planted &&
            j % 3 == static_cast<std::size_t>(c))
          mean = separation;
        r.table.values[row * d + j] = mean + noise(rng);
      }
    }
  return r;
}

CategoryMap categorize_features(const std::vector<std::string>& names,
                                const std::vector<CategoryRule>& rules) {
  if (rules.empty())
    throw std::invalid_argument("categorize_features: rule list is empty");
  CategoryMap map;
  map.assignment.reserve(names.size());
  for (const auto& name : names) {
    FeatureCategory cat = FeatureCategory::Other;
    for (const auto& rule : rules)
      if (name.find(rule.pattern) != std::string::npos) {
        cat = rule.category;
        break;
      }
    map.assignment.push_back(cat);
  }
  return map;
}

}  // namespace na
