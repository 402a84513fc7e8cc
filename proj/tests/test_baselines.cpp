#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "support/toy_data.hpp"
#include "vos/baselines.hpp"

namespace vos {
namespace {

Dataset from_rows(std::vector<std::vector<double>> rows, std::vector<int> labels) {
  Matrix x(0, rows.front().size());
  for (const auto& r : rows) x.append_row(r);
  return Dataset::from_matrix(std::move(x), std::move(labels),
                              std::vector<FeatureKind>(rows.front().size(), FeatureKind::kContinuous));
}

TEST(Neighbors, TiesGoToLowerIndex) {
  const Dataset d = from_rows({{0, 0}, {1, 0}, {-1, 0}, {0, 1}}, {0, 0, 0, 0});
  const std::vector<std::size_t> cand{0, 1, 2, 3};
  EXPECT_EQ(nearest_neighbors(d.features, cand, 0, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(Interpolate, MidpointAndEndpoint) {
  const std::vector<double> a{0, 0}, b{1, 1};
  EXPECT_EQ(interpolate(a, b, 0.5), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(interpolate(a, b, 0.0), a);
}

TEST(Smote, TwoPointsYieldsSegmentPoints) {
  const Dataset d = from_rows({{5, 5}, {6, 5}, {7, 5}, {0, 0}, {1, 1}}, {0, 0, 0, 1, 1});
  const auto s = smote(d, {1, 1.0, 3});
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.label, 1);
  const std::size_t other = s.base[0] == 3 ? 4 : 3;
  EXPECT_EQ(s.neighbor[0], other);
  const auto expect = interpolate(d.features.row(s.base[0]), d.features.row(other), s.step[0]);
  EXPECT_EQ(s.rows(0, 0), expect[0]);
  EXPECT_EQ(s.rows(0, 1), expect[1]);
}

TEST(Smote, RowsAreRecordedConvexCombinations) {
  testing::GaussianBlobs spec;
  spec.majority = 300;
  spec.minority = 30;
  const Dataset d = testing::gaussian_blobs(spec, 7);
  const auto s = smote(d, {5, 1.0, 7});
  ASSERT_EQ(s.size(), 270u);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const auto xi = d.features.row(s.base[r]);
    const auto xn = d.features.row(s.neighbor[r]);
    EXPECT_EQ(d.labels[s.base[r]], 1);
    EXPECT_EQ(d.labels[s.neighbor[r]], 1);
    EXPECT_NE(s.base[r], s.neighbor[r]);
    EXPECT_GE(s.step[r], 0.0);
    EXPECT_LE(s.step[r], 1.0);
    for (std::size_t j = 0; j < d.dims(); ++j) {
      EXPECT_NEAR(s.rows(r, j), xi[j] + s.step[r] * (xn[j] - xi[j]), 1e-12);
      EXPECT_GE(s.rows(r, j), std::min(xi[j], xn[j]) - 1e-12);
      EXPECT_LE(s.rows(r, j), std::max(xi[j], xn[j]) + 1e-12);
    }
  }
}

TEST(Smote, NeighborIsAmongKNearestMinority) {
  testing::GaussianBlobs spec;
  spec.majority = 100;
  spec.minority = 20;
  const Dataset d = testing::gaussian_blobs(spec, 2);
  const auto s = smote(d, {3, 1.0, 2});
  const auto minority = rows_with_label(d, 1);
  for (std::size_t r = 0; r < s.size(); ++r) {
    // Brute force: rank all other minority rows by distance to the base row.
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j : minority)
      if (j != s.base[r]) ranked.push_back({squared_distance(d.features.row(s.base[r]), d.features.row(j)), j});
    std::sort(ranked.begin(), ranked.end());
    bool found = false;
    for (std::size_t q = 0; q < 3; ++q) found = found || ranked[q].second == s.neighbor[r];
    EXPECT_TRUE(found);
  }
}

TEST(Smote, RoundRobinOverMinority) {
  testing::GaussianBlobs spec;
  spec.majority = 100;
  spec.minority = 20;
  const Dataset d = testing::gaussian_blobs(spec, 2);
  const auto s = smote(d, {5, 1.0, 2});
  const auto minority = rows_with_label(d, 1);
  for (std::size_t r = 0; r < s.size(); ++r) EXPECT_EQ(s.base[r], minority[r % minority.size()]);
}

TEST(Smote, DeterministicAndRatioRespected) {
  testing::GaussianBlobs spec;
  spec.majority = 200;
  spec.minority = 20;
  const Dataset d = testing::gaussian_blobs(spec, 5);
  const auto a = smote(d, {5, 0.5, 11});
  const auto b = smote(d, {5, 0.5, 11});
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.size(), 80u);
}

TEST(Smote, TooFewMinorityRows) {
  const Dataset d = from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {0, 0, 1, 1});
  EXPECT_THROW(smote(d, {2, 1.0, 0}), ValidationError);
}

TEST(Adasyn, TotalWithinRoundingSlack) {
  testing::GaussianBlobs spec;
  spec.majority = 100;
  spec.minority = 20;
  spec.minority_center[0] = spec.minority_center[1] = 1.0;
  const Dataset d = testing::gaussian_blobs(spec, 3);
  AdasynConfig cfg;
  cfg.seed = 3;
  const auto r = adasyn(d, cfg);
  EXPECT_DOUBLE_EQ(r.total_requested, 80.0);
  const double n = static_cast<double>(r.synthetic.size());
  EXPECT_GE(n, 80.0 - 20.0);
  EXPECT_LE(n, 80.0 + 20.0);
  EXPECT_EQ(r.synthetic.label, 1);
}

// Exhaustive recount of majority neighbours on a 30-point set.
TEST(Adasyn, AllocationMatchesBruteForce) {
  Rng rng(31);
  Matrix x(0, 2);
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    const int label = i % 3 == 0 ? 1 : 0;
    const double row[2] = {standard_normal(rng) + label, standard_normal(rng)};
    x.append_row(row);
    y.push_back(label);
  }
  const Dataset d = Dataset::from_matrix(x, y, {FeatureKind::kContinuous, FeatureKind::kContinuous});
  AdasynConfig cfg;
  cfg.k = 5;
  cfg.seed = 1;
  const auto res = adasyn(d, cfg);

  std::vector<double> r;
  for (std::size_t i = 0; i < 30; ++i) {
    if (y[i] != 1) continue;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < 30; ++j) {
      if (j == i) continue;
      const double dx = x(i, 0) - x(j, 0), dy = x(i, 1) - x(j, 1);
      ranked.push_back({dx * dx + dy * dy, j});
    }
    std::sort(ranked.begin(), ranked.end());
    int majority = 0;
    for (int q = 0; q < 5; ++q) majority += y[ranked[q].second] == 0;
    r.push_back(majority / 5.0);
  }
  const double sum = std::accumulate(r.begin(), r.end(), 0.0);
  ASSERT_EQ(res.allocation.size(), r.size());
  for (std::size_t a = 0; a < r.size(); ++a) {
    EXPECT_EQ(res.majority_neighbors[a], static_cast<std::size_t>(std::lround(r[a] * 5)));
    EXPECT_NEAR(res.difficulty[a], r[a] / sum, 1e-12);
    EXPECT_EQ(res.allocation[a], static_cast<std::size_t>(std::llround(r[a] / sum * 10.0)));
  }
}

TEST(Adasyn, SafePointGetsNothingAndMonotone) {
  testing::GaussianBlobs spec;
  spec.majority = 200;
  spec.minority = 40;
  spec.minority_center[0] = spec.minority_center[1] = 1.5;
  const Dataset d = testing::gaussian_blobs(spec, 9);
  AdasynConfig cfg;
  cfg.seed = 9;
  const auto res = adasyn(d, cfg);
  for (std::size_t a = 0; a < res.allocation.size(); ++a) {
    if (res.majority_neighbors[a] == 0) EXPECT_EQ(res.allocation[a], 0u);
    for (std::size_t b = 0; b < res.allocation.size(); ++b)
      if (res.majority_neighbors[a] > res.majority_neighbors[b]) EXPECT_GE(res.allocation[a], res.allocation[b]);
  }
  std::vector<std::size_t> counts(res.minority_rows.size(), 0);
  for (std::size_t base : res.synthetic.base) {
    const auto it = std::find(res.minority_rows.begin(), res.minority_rows.end(), base);
    ASSERT_NE(it, res.minority_rows.end());
    counts[static_cast<std::size_t>(it - res.minority_rows.begin())]++;
  }
  EXPECT_EQ(counts, res.allocation);
}

TEST(Adasyn, UniformFallbackWarns) {
  // Minority far from every majority point: no majority neighbours.
  const Dataset d = from_rows({{0, 0}, {0.1, 0}, {0.2, 0}, {0.3, 0}, {0.4, 0}, {0.5, 0}, {0.6, 0}, {0.7, 0},
                               {100, 100}, {100.1, 100}, {100.2, 100}, {100.3, 100}},
                              {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
  AdasynConfig cfg;
  cfg.k = 3;
  const auto res = adasyn(d, cfg);
  ASSERT_FALSE(res.synthetic.warnings.empty());
  for (std::size_t g : res.allocation) EXPECT_EQ(g, 1u);
}

TEST(Adasyn, DeterministicAndConvex) {
  testing::GaussianBlobs spec;
  spec.majority = 150;
  spec.minority = 25;
  spec.minority_center[0] = spec.minority_center[1] = 1.0;
  const Dataset d = testing::gaussian_blobs(spec, 4);
  AdasynConfig cfg;
  cfg.seed = 4;
  const auto a = adasyn(d, cfg), b = adasyn(d, cfg);
  EXPECT_EQ(a.synthetic.rows, b.synthetic.rows);
  for (std::size_t r = 0; r < a.synthetic.size(); ++r) {
    const auto xi = d.features.row(a.synthetic.base[r]);
    const auto xn = d.features.row(a.synthetic.neighbor[r]);
    EXPECT_EQ(d.labels[a.synthetic.neighbor[r]], 1);
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(a.synthetic.rows(r, j), xi[j] + a.synthetic.step[r] * (xn[j] - xi[j]), 1e-12);
  }
}

TEST(Adasyn, InvalidConfig) {
  const Dataset d = from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {0, 0, 1, 1});
  AdasynConfig cfg;
  cfg.k = 4;
  EXPECT_THROW(adasyn(d, cfg), ValidationError);
  cfg.k = 2;
  cfg.beta = 0.0;
  EXPECT_THROW(adasyn(d, cfg), ValidationError);
}

TEST(Adasyn, BetaForRatio) {
  EXPECT_DOUBLE_EQ(adasyn_beta_for_ratio(1000, 50, 1.0), 1.0);
  EXPECT_NEAR(adasyn_beta_for_ratio(1000, 50, 0.5), 450.0 / 950.0, 1e-15);
}

}  // namespace
}  // namespace vos
