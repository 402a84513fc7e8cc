#pragma once

// SMOTE and ADASYN reference oversamplers. Neighbour search is brute-force
// Euclidean with ties broken by the lower row index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vos/dataset.hpp"
#include "vos/errors.hpp"
#include "vos/matrix.hpp"
#include "vos/random.hpp"
#include "vos/vos_model.hpp"

namespace vos {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// The k rows among `candidates` closest to row `query` of `x`, excluding `query` itself.
inline std::vector<std::size_t> nearest_neighbors(const Matrix& x, std::span<const std::size_t> candidates,
                                                  std::size_t query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (std::size_t c : candidates) {
    if (c == query) continue;
    scored.emplace_back(squared_distance(x.row(query), x.row(c)), c);
  }
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

/// x_i + u * (x_nn - x_i).
inline std::vector<double> interpolate(std::span<const double> base, std::span<const double> neighbor, double u) {
  std::vector<double> out(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) out[j] = base[j] + u * (neighbor[j] - base[j]);
  return out;
}

/// Generated rows with the dataset row indices they interpolate between.
struct SyntheticRows {
  Matrix rows;
  int label = 1;
  std::vector<std::size_t> base;
  std::vector<std::size_t> neighbor;
  std::vector<double> step;  // u of each row
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return rows.rows(); }

  void push(const Matrix& x, std::size_t i, std::size_t nn, double u) {
    rows.append_row(interpolate(x.row(i), x.row(nn), u));
    base.push_back(i);
    neighbor.push_back(nn);
    step.push_back(u);
  }
};

inline std::vector<std::size_t> rows_with_label(const Dataset& d, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.labels[i] == label) out.push_back(i);
  return out;
}

struct SmoteConfig {
  std::size_t k = 5;
  double target_ratio = 1.0;
  std::uint64_t seed = 0;
};

inline SyntheticRows smote(const Dataset& data, const SmoteConfig& cfg) {
  require_both_classes(data, "smote");
  if (cfg.k == 0) throw ValidationError("smote: k must be positive");
  const int minority = data.minority_label();
  const auto min_rows = rows_with_label(data, minority);
  if (min_rows.size() < cfg.k + 1)
    throw ValidationError("smote: minority class has " + std::to_string(min_rows.size()) +
                          " rows, need at least k+1 = " + std::to_string(cfg.k + 1));
  const std::size_t needed =
      synthetic_count_for_ratio(data.count(1 - minority), min_rows.size(), cfg.target_ratio);

  SyntheticRows out;
  out.label = minority;
  out.rows = Matrix(0, data.dims());
  if (needed == 0) return out;

  std::vector<std::vector<std::size_t>> neighbors(min_rows.size());
  for (std::size_t a = 0; a < min_rows.size(); ++a)
    neighbors[a] = nearest_neighbors(data.features, min_rows, min_rows[a], cfg.k);

  Rng rng = make_rng(cfg.seed, Stream::kSmote);
  for (std::size_t n = 0; n < needed; ++n) {
    const std::size_t a = n % min_rows.size();
    const auto& nn = neighbors[a];
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, nn.size() - 1)(rng);
    out.push(data.features, min_rows[a], nn[pick], uniform01(rng));
  }
  return out;
}

struct AdasynConfig {
  std::size_t k = 5;  // neighbourhood over the full dataset
  double beta = 1.0;
  std::size_t interpolation_k = 5;  // minority-only neighbourhood
  std::uint64_t seed = 0;
};

struct AdasynResult {
  SyntheticRows synthetic;
  std::vector<std::size_t> minority_rows;
  std::vector<std::size_t> majority_neighbors;  // Delta_i
  std::vector<double> difficulty;               // normalised r_i
  std::vector<std::size_t> allocation;          // g_i
  double total_requested = 0.0;                 // G
};

inline AdasynResult adasyn(const Dataset& data, const AdasynConfig& cfg) {
  require_both_classes(data, "adasyn");
  if (cfg.k == 0 || cfg.k >= data.size()) throw ValidationError("adasyn: K must lie in [1, dataset size)");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) throw ValidationError("adasyn: beta must lie in (0, 1]");
  const int minority = data.minority_label();
  AdasynResult res;
  res.minority_rows = rows_with_label(data, minority);
  const auto& min_rows = res.minority_rows;
  if (min_rows.size() < 2) throw ValidationError("adasyn: minority class needs at least 2 rows");
  const std::size_t m_min = min_rows.size();
  const std::size_t m_maj = data.count(1 - minority);
  res.total_requested = static_cast<double>(m_maj - std::min(m_maj, m_min)) * cfg.beta;

  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  res.majority_neighbors.resize(m_min);
  std::vector<double> r(m_min);
  double r_sum = 0.0;
  for (std::size_t a = 0; a < m_min; ++a) {
    const auto nn = nearest_neighbors(data.features, all, min_rows[a], cfg.k);
    const auto delta = static_cast<std::size_t>(
        std::count_if(nn.begin(), nn.end(), [&](std::size_t j) { return data.labels[j] != minority; }));
    res.majority_neighbors[a] = delta;
    r[a] = static_cast<double>(delta) / static_cast<double>(cfg.k);
    r_sum += r[a];
  }
  res.difficulty.resize(m_min);
  if (r_sum == 0.0) {
    res.synthetic.warnings.push_back("adasyn: no minority row has majority neighbours; allocating uniformly");
    std::fill(res.difficulty.begin(), res.difficulty.end(), 1.0 / static_cast<double>(m_min));
  } else {
    for (std::size_t a = 0; a < m_min; ++a) res.difficulty[a] = r[a] / r_sum;
  }
  res.allocation.resize(m_min);
  for (std::size_t a = 0; a < m_min; ++a)
    res.allocation[a] = static_cast<std::size_t>(std::llround(res.difficulty[a] * res.total_requested));

  auto& out = res.synthetic;
  out.label = minority;
  out.rows = Matrix(0, data.dims());
  const std::size_t k_interp = std::min(cfg.interpolation_k, m_min - 1);
  Rng rng = make_rng(cfg.seed, Stream::kAdasyn);
  for (std::size_t a = 0; a < m_min; ++a) {
    if (res.allocation[a] == 0) continue;
    const auto nn = nearest_neighbors(data.features, min_rows, min_rows[a], k_interp);
    for (std::size_t g = 0; g < res.allocation[a]; ++g) {
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, nn.size() - 1)(rng);
      out.push(data.features, min_rows[a], nn[pick], uniform01(rng));
    }
  }
  return res;
}

/// beta that makes ADASYN's G bring the minority/majority ratio to `ratio`.
inline double adasyn_beta_for_ratio(std::size_t majority, std::size_t minority, double ratio) {
  if (majority <= minority) return 1.0;
  const double beta = (ratio * static_cast<double>(majority) - static_cast<double>(minority)) /
                      static_cast<double>(majority - minority);
  return std::clamp(beta, 1e-9, 1.0);
}

}  // namespace vos
