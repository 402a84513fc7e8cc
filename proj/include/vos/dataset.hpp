#pragma once

// Tabular dataset container, CSV ingestion/export, standardisation and
// stratified train/test splitting.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vos/errors.hpp"
#include "vos/matrix.hpp"
#include "vos/random.hpp"

namespace vos {

enum class FeatureKind : std::uint8_t { kContinuous = 0, kBinary = 1 };
enum class Provenance : std::uint8_t { kReal = 0, kSynthetic = 1 };

inline constexpr std::size_t kSyntheticRowId = std::numeric_limits<std::size_t>::max();

inline const char* to_string(Provenance p) { return p == Provenance::kReal ? "real" : "synthetic"; }

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<FeatureKind> kinds;
  std::vector<std::string> columns;
  std::vector<double> weights;
  std::vector<Provenance> provenance;
  // Index of the row in the source it was loaded from; kSyntheticRowId for generated rows.
  std::vector<std::size_t> row_ids;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dims() const noexcept { return features.cols(); }

  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
  std::size_t count(Provenance p) const {
    return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
  }

  /// Label with fewer rows; ties resolve to 1.
  int minority_label() const { return count(1) <= count(0) ? 1 : 0; }

  /// Builds a dataset of real rows with unit weights and ids 0..n-1.
  static Dataset from_matrix(Matrix x, std::vector<int> y, std::vector<FeatureKind> kinds = {},
                             std::vector<std::string> columns = {}) {
    Dataset d;
    const std::size_t n = x.rows();
    const std::size_t dx = x.cols();
    d.features = std::move(x);
    d.labels = std::move(y);
    d.kinds = kinds.empty() ? std::vector<FeatureKind>(dx, FeatureKind::kContinuous) : std::move(kinds);
    if (columns.empty()) {
      for (std::size_t j = 0; j < dx; ++j) columns.push_back("x" + std::to_string(j));
    }
    d.columns = std::move(columns);
    d.weights.assign(n, 1.0);
    d.provenance.assign(n, Provenance::kReal);
    d.row_ids.resize(n);
    std::iota(d.row_ids.begin(), d.row_ids.end(), std::size_t{0});
    d.validate();
    return d;
  }

  void validate() const {
    const std::size_t n = features.rows();
    if (labels.size() != n || weights.size() != n || provenance.size() != n || row_ids.size() != n)
      throw ShapeError("Dataset: per-row vectors disagree with feature row count");
    if (kinds.size() != features.cols() || columns.size() != features.cols())
      throw ShapeError("Dataset: per-column vectors disagree with feature column count");
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != 0 && labels[i] != 1)
        throw ValidationError("Dataset: label at row " + std::to_string(i) + " is not 0/1");
      if (!(weights[i] >= 0.0)) throw ValidationError("Dataset: negative weight at row " + std::to_string(i));
      for (std::size_t j = 0; j < features.cols(); ++j) {
        const double v = features(i, j);
        if (!std::isfinite(v))
          throw ValidationError("Dataset: non-finite value at row " + std::to_string(i) + ", column " +
                                columns[j]);
        if (kinds[j] == FeatureKind::kBinary && v != 0.0 && v != 1.0)
          throw ValidationError("Dataset: binary column " + columns[j] + " holds " + std::to_string(v) +
                                " at row " + std::to_string(i));
      }
    }
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset d;
    d.kinds = kinds;
    d.columns = columns;
    d.features = Matrix(0, dims());
    for (std::size_t i : indices) {
      if (i >= size()) throw ShapeError("Dataset::subset: index out of range");
      d.features.append_row(features.row(i));
      d.labels.push_back(labels[i]);
      d.weights.push_back(weights[i]);
      d.provenance.push_back(provenance[i]);
      d.row_ids.push_back(row_ids[i]);
    }
    return d;
  }

  /// Appends generated rows sharing one label and weight.
  void append_synthetic(const Matrix& rows, int label, double weight) {
    if (rows.rows() == 0) return;
    if (rows.cols() != dims()) throw ShapeError("append_synthetic: column count mismatch");
    features.append_rows(rows);
    labels.insert(labels.end(), rows.rows(), label);
    weights.insert(weights.end(), rows.rows(), weight);
    provenance.insert(provenance.end(), rows.rows(), Provenance::kSynthetic);
    row_ids.insert(row_ids.end(), rows.rows(), kSyntheticRowId);
  }
};

/// Checks the class-presence precondition shared by the oversamplers.
inline void require_both_classes(const Dataset& d, const char* who) {
  if (d.count(0) == 0 || d.count(1) == 0)
    throw ValidationError(std::string(who) + ": dataset must contain both classes");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Writes via a temporary sibling then renames over the destination.
template <typename Writer>
void atomic_write(const std::filesystem::path& path, Writer&& writer, bool binary = false) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline constexpr std::string_view kWeightColumn = "sample_weight";
inline constexpr std::string_view kProvenanceColumn = "provenance";

struct LoadSummary {
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Parses a headed CSV from a stream. `sample_weight` and `provenance`
/// columns, when present, are read as metadata instead of features.
inline Dataset parse_csv(std::istream& in, std::string_view label_column, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(source + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header;
  for (auto cell : detail::split_commas(line)) header.emplace_back(cell);
  std::optional<std::size_t> label_idx, weight_idx, prov_idx;
  std::vector<std::size_t> feature_idx;
  Dataset d;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_idx = c;
    } else if (header[c] == kWeightColumn) {
      weight_idx = c;
    } else if (header[c] == kProvenanceColumn) {
      prov_idx = c;
    } else {
      feature_idx.push_back(c);
      d.columns.emplace_back(header[c]);
    }
  }
  if (!label_idx) throw ConfigError(source + ": label column '" + std::string(label_column) + "' not found");

  d.features = Matrix(0, feature_idx.size());
  std::vector<double> row(feature_idx.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw ConfigError(source + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    for (std::size_t k = 0; k < feature_idx.size(); ++k) {
      const auto v = detail::parse_double(cells[feature_idx[k]]);
      if (!v || !std::isfinite(*v))
        throw ConfigError(source + ": unparseable value '" + std::string(cells[feature_idx[k]]) + "' at row " +
                          std::to_string(line_no) + ", column " + header[feature_idx[k]]);
      row[k] = *v;
    }
    const auto lab = detail::parse_double(cells[*label_idx]);
    if (!lab || (*lab != 0.0 && *lab != 1.0))
      throw ConfigError(source + ": label '" + std::string(cells[*label_idx]) + "' at row " +
                        std::to_string(line_no) + " is not 0/1");
    double w = 1.0;
    if (weight_idx) {
      const auto pw = detail::parse_double(cells[*weight_idx]);
      if (!pw || !(*pw >= 0.0))
        throw ConfigError(source + ": invalid sample_weight at row " + std::to_string(line_no));
      w = *pw;
    }
    Provenance p = Provenance::kReal;
    if (prov_idx) {
      if (cells[*prov_idx] == "synthetic") {
        p = Provenance::kSynthetic;
      } else if (cells[*prov_idx] != "real") {
        throw ConfigError(source + ": invalid provenance at row " + std::to_string(line_no));
      }
    }
    d.features.append_row(row);
    d.labels.push_back(static_cast<int>(*lab));
    d.weights.push_back(w);
    d.provenance.push_back(p);
  }
  std::size_t real_counter = 0;
  for (Provenance p : d.provenance) d.row_ids.push_back(p == Provenance::kReal ? real_counter++ : kSyntheticRowId);

  d.kinds.assign(d.dims(), FeatureKind::kContinuous);
  for (std::size_t j = 0; j < d.dims(); ++j) {
    bool binary = d.size() > 0;
    for (std::size_t i = 0; i < d.size() && binary; ++i) {
      const double v = d.features(i, j);
      binary = (v == 0.0 || v == 1.0);
    }
    if (binary) d.kinds[j] = FeatureKind::kBinary;
  }
  d.validate();
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path, std::string_view label_column = "class") {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse_csv(in, label_column, path.string());
}

inline LoadSummary summarize(const Dataset& d) { return {d.size(), d.count(1), d.count(0)}; }

struct CsvWriteOptions {
  std::string label_column = "class";
  bool include_metadata = false;  // sample_weight + provenance columns
};

inline void write_csv(std::ostream& out, const Dataset& d, const CsvWriteOptions& opt = {}) {
  for (std::size_t j = 0; j < d.dims(); ++j) out << d.columns[j] << ',';
  out << opt.label_column;
  if (opt.include_metadata) out << ',' << kWeightColumn << ',' << kProvenanceColumn;
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.dims(); ++j) out << detail::format_number(d.features(i, j)) << ',';
    out << d.labels[i];
    if (opt.include_metadata) out << ',' << detail::format_number(d.weights[i]) << ',' << to_string(d.provenance[i]);
    out << '\n';
  }
}

inline void save_csv(const std::filesystem::path& path, const Dataset& d, const CsvWriteOptions& opt = {}) {
  detail::atomic_write(path, [&](std::ostream& out) { write_csv(out, d, opt); });
}

// ---------------------------------------------------------------------------
// Standardisation

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> scaled;  // false for binary and constant columns
  std::vector<std::string> warnings;

  std::size_t dims() const noexcept { return mean.size(); }
  friend bool operator==(const ScalerParams& a, const ScalerParams& b) {
    return a.mean == b.mean && a.stddev == b.stddev && a.scaled == b.scaled;
  }
};

/// Population mean/std of continuous columns; constant columns are flagged and left unscaled.
inline ScalerParams fit_scaler(const Dataset& d) {
  ScalerParams p;
  const std::size_t dx = d.dims();
  p.mean.assign(dx, 0.0);
  p.stddev.assign(dx, 1.0);
  p.scaled.assign(dx, false);
  if (d.size() == 0) throw ValidationError("fit_scaler: empty dataset");
  const double n = static_cast<double>(d.size());
  for (std::size_t j = 0; j < dx; ++j) {
    if (d.kinds[j] != FeatureKind::kContinuous) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) sum += d.features(i, j);
    const double mu = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double c = d.features(i, j) - mu;
      ss += c * c;
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
      p.warnings.push_back("column " + d.columns[j] + " is constant; left unscaled");
      continue;
    }
    p.mean[j] = mu;
    p.stddev[j] = sd;
    p.scaled[j] = true;
  }
  return p;
}

inline void apply_scaler(const ScalerParams& p, Matrix& x) {
  if (x.cols() != p.dims()) throw ShapeError("apply_scaler: column count mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (p.scaled[j]) x(i, j) = (x(i, j) - p.mean[j]) / p.stddev[j];
}

inline void invert_scaler(const ScalerParams& p, Matrix& x) {
  if (x.cols() != p.dims()) throw ShapeError("invert_scaler: column count mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (p.scaled[j]) x(i, j) = x(i, j) * p.stddev[j] + p.mean[j];
}

inline Dataset apply_scaler(const ScalerParams& p, Dataset d) {
  apply_scaler(p, d.features);
  return d;
}

inline Dataset invert_scaler(const ScalerParams& p, Dataset d) {
  invert_scaler(p, d.features);
  return d;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split. The test set holds round(fraction*N) rows overall, with
/// the minority share rounded per class and at least one minority row on each side.
inline SplitIndices split_indices(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("split_train_test: test fraction must lie in (0,1)");
  const int minority = d.minority_label();
  const std::size_t n_min = d.count(minority);
  if (n_min < 2) throw ValidationError("split_train_test: minority class needs at least 2 rows");

  std::vector<std::size_t> min_idx, maj_idx;
  for (std::size_t i = 0; i < d.size(); ++i) (d.labels[i] == minority ? min_idx : maj_idx).push_back(i);
  Rng rng = make_rng(seed, Stream::kSplit);
  std::shuffle(min_idx.begin(), min_idx.end(), rng);
  std::shuffle(maj_idx.begin(), maj_idx.end(), rng);

  const auto n_total_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(d.size())));
  std::size_t min_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n_min)));
  min_test = std::clamp<std::size_t>(min_test, 1, n_min - 1);
  std::size_t maj_test = n_total_test > min_test ? n_total_test - min_test : 0;
  maj_test = std::min(maj_test, maj_idx.size());

  SplitIndices s;
  s.test.assign(min_idx.begin(), min_idx.begin() + static_cast<std::ptrdiff_t>(min_test));
  s.test.insert(s.test.end(), maj_idx.begin(), maj_idx.begin() + static_cast<std::ptrdiff_t>(maj_test));
  s.train.assign(min_idx.begin() + static_cast<std::ptrdiff_t>(min_test), min_idx.end());
  s.train.insert(s.train.end(), maj_idx.begin() + static_cast<std::ptrdiff_t>(maj_test), maj_idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction, std::uint64_t seed) {
  const auto s = split_indices(d, test_fraction, seed);
  return {d.subset(s.train), d.subset(s.test)};
}

}  // namespace vos
