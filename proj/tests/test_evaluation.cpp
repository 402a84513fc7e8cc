#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support/toy_data.hpp"
#include "vos/evaluation.hpp"

namespace vos {
namespace {

TEST(Metrics, PublishedF1FromPrecisionRecall) { EXPECT_NEAR(f1_score(0.802, 0.908), 0.852, 5e-4); }

TEST(Metrics, AllCorrect) {
  const std::vector<int> y{0, 1, 1, 0, 1};
  const auto m = compute_metrics(y, y);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.predicted_positives, 3u);
  EXPECT_FALSE(m.degenerate);
}

TEST(Metrics, OneOfEach) {
  const std::vector<int> preds{1, 1, 0, 0}, labels{1, 0, 1, 0};
  const auto m = compute_metrics(preds, labels);
  EXPECT_EQ(m.counts.tp, 1u);
  EXPECT_EQ(m.counts.fp, 1u);
  EXPECT_EQ(m.counts.fn, 1u);
  EXPECT_EQ(m.counts.tn, 1u);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
  const std::vector<int> preds{0, 0, 0}, labels{0, 1, 0};
  const auto m = compute_metrics(preds, labels);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.predicted_positives, 0u);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}), ValidationError);
  EXPECT_THROW(compute_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), ShapeError);
  EXPECT_THROW(compute_metrics(std::vector<int>{2}, std::vector<int>{1}), ValidationError);
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(5);
  std::vector<int> p(200), l(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p[i] = uniform01(rng) < 0.3;
    l[i] = uniform01(rng) < 0.2;
  }
  const auto base = compute_metrics(p, l);
  std::vector<std::size_t> perm(200);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> pp(200), lp(200);
  for (std::size_t i = 0; i < 200; ++i) {
    pp[i] = p[perm[i]];
    lp[i] = l[perm[i]];
  }
  const auto shuffled = compute_metrics(pp, lp);
  EXPECT_EQ(base.f1, shuffled.f1);
  EXPECT_EQ(base.accuracy, shuffled.accuracy);
  EXPECT_NEAR(base.f1, 2 * base.precision * base.recall / (base.precision + base.recall), 1e-15);
}

void expect_partition(const KFoldSplit& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : s.folds) {
    EXPECT_EQ(f.train.size() + f.heldout.size(), n);
    for (std::size_t i : f.heldout) seen[i]++;
    std::set<std::size_t> both(f.train.begin(), f.train.end());
    for (std::size_t i : f.heldout) EXPECT_FALSE(both.count(i));
  }
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(KFold, TenRowsFiveFolds) {
  const std::vector<int> y{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto s = kfold_split(y, 5, 1);
  ASSERT_EQ(s.folds.size(), 5u);
  for (const auto& f : s.folds) EXPECT_EQ(f.heldout.size(), 2u);
  expect_partition(s, 10);
  EXPECT_TRUE(s.stratified);
}

TEST(KFold, StratifiedAndBalanced) {
  std::vector<int> y(103, 0);
  for (std::size_t i = 0; i < 17; ++i) y[i * 6] = 1;
  const auto s = kfold_split(y, 5, 3);
  expect_partition(s, y.size());
  std::size_t lo = y.size(), hi = 0;
  for (const auto& f : s.folds) {
    lo = std::min(lo, f.heldout.size());
    hi = std::max(hi, f.heldout.size());
    std::size_t pos = 0;
    for (std::size_t i : f.heldout) pos += y[i];
    const double expected = 17.0 * static_cast<double>(f.heldout.size()) / 103.0;
    EXPECT_LE(std::abs(static_cast<double>(pos) - expected), 1.0);
  }
  EXPECT_LE(hi - lo, 1u);
}

TEST(KFold, DeterministicAndSeedSensitive) {
  std::vector<int> y(50, 0);
  for (std::size_t i = 0; i < 10; ++i) y[i] = 1;
  const auto a = kfold_split(y, 5, 9), b = kfold_split(y, 5, 9), c = kfold_split(y, 5, 10);
  for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(a.folds[f].heldout, b.folds[f].heldout);
  bool differs = false;
  for (std::size_t f = 0; f < 5; ++f) differs = differs || a.folds[f].heldout != c.folds[f].heldout;
  EXPECT_TRUE(differs);
}

TEST(KFold, SmallClassFallsBackWithWarning) {
  std::vector<int> y(20, 0);
  y[0] = y[1] = 1;
  const auto s = kfold_split(y, 5, 1);
  EXPECT_FALSE(s.stratified);
  EXPECT_FALSE(s.warnings.empty());
  expect_partition(s, 20);
}

TEST(KFold, InvalidK) {
  const std::vector<int> y{0, 1, 0};
  EXPECT_THROW(kfold_split(y, 1, 0), ValidationError);
  EXPECT_THROW(kfold_split(y, 4, 0), ValidationError);
}

Dataset small_task(std::uint64_t seed) {
  testing::GaussianBlobs spec;
  spec.majority = 80;
  spec.minority = 20;
  return testing::gaussian_blobs(spec, seed);
}

FoldScorer table_scorer(std::map<std::string, double> base, double scale = 1.0, int* calls = nullptr) {
  return [base, scale, calls](const Architecture& a, const Dataset&, const Dataset& heldout, std::uint64_t) {
    if (calls) ++*calls;
    return scale * (base.at(a.to_string()) + 0.01 * static_cast<double>(heldout.size() % 7));
  };
}

TEST(Search, SingleCandidateReturnedWithoutTraining) {
  int calls = 0;
  CvConfig cfg;
  cfg.candidates = {Architecture::symmetric(8, 2, 2)};
  const auto r = architecture_search(small_task(1), cfg, TrainConfig{}, table_scorer({}, 1.0, &calls));
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(r.best.to_string(), "8:2:2");
}

TEST(Search, FaultInjectedCandidateLoses) {
  CvConfig cfg;
  cfg.candidates = {Architecture::symmetric(8, 2, 2), Architecture::symmetric(16, 4, 2)};
  const auto r = architecture_search(small_task(1), cfg, TrainConfig{}, table_scorer({{"8:2:2", 1e6}, {"16:4:2", 2.0}}));
  EXPECT_EQ(r.best.to_string(), "16:4:2");
  EXPECT_EQ(r.best_index, 1u);
}

TEST(Search, TiesGoToFewerParameters) {
  CvConfig cfg;
  cfg.candidates = {Architecture::symmetric(16, 4, 2), Architecture::symmetric(8, 2, 2)};
  const auto r = architecture_search(small_task(1), cfg, TrainConfig{}, table_scorer({{"8:2:2", 3.0}, {"16:4:2", 3.0}}));
  EXPECT_EQ(r.best.to_string(), "8:2:2");
}

TEST(Search, AllFailuresRaiseSearchError) {
  CvConfig cfg;
  cfg.candidates = {Architecture::symmetric(16, 4, 2), Architecture::symmetric(8, 2, 2)};
  const FoldScorer boom = [](const Architecture&, const Dataset&, const Dataset&, std::uint64_t) -> double {
    throw TrainingError("diverged");
  };
  try {
    architecture_search(small_task(1), cfg, TrainConfig{}, boom);
    FAIL();
  } catch (const SearchError& e) {
    EXPECT_NE(std::string(e.what()).find("8:2:2"), std::string::npos);
  }
}

TEST(Search, ScorerSeesDisjointFolds) {
  CvConfig cfg;
  cfg.k = 4;
  cfg.candidates = {Architecture::symmetric(16, 4, 2), Architecture::symmetric(8, 2, 2)};
  const Dataset d = small_task(2);
  const FoldScorer check = [&](const Architecture&, const Dataset& train, const Dataset& heldout, std::uint64_t) {
    EXPECT_EQ(train.size() + heldout.size(), d.size());
    std::set<std::size_t> ids(train.row_ids.begin(), train.row_ids.end());
    for (std::size_t id : heldout.row_ids) EXPECT_FALSE(ids.count(id));
    return 1.0;
  };
  const auto r = architecture_search(d, cfg, TrainConfig{}, check);
  EXPECT_EQ(r.candidates[0].fold_losses.size(), 4u);
}

// Parse the emitted log back and recompute every fold mean.
TEST(Search, LogMeansEqualRecomputedMeans) {
  CvConfig cfg;
  cfg.k = 3;
  cfg.candidates = {Architecture::symmetric(8, 2, 2), Architecture::symmetric(4, 2, 2)};
  const auto r = architecture_search(small_task(3), cfg, TrainConfig{0.01, 5, 16, 0});
  std::ostringstream log;
  write_search_log(log, r);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "candidate,architecture,parameters,fold,loss");
  std::map<std::string, std::vector<double>> folds;
  std::map<std::string, double> means;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 5u);
    if (cells[3] == "mean") {
      means[cells[1]] = std::stod(cells[4]);
    } else {
      folds[cells[1]].push_back(std::stod(cells[4]));
    }
  }
  std::string best;
  double best_mean = INFINITY;
  for (const auto& [arch, v] : folds) {
    ASSERT_EQ(v.size(), 3u);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 3.0;
    EXPECT_NEAR(mean, means[arch], 1e-12 * std::abs(mean));
    if (mean < best_mean) {
      best_mean = mean;
      best = arch;
    }
  }
  EXPECT_EQ(best, r.best.to_string());
}

TEST(Search, PositiveRescalingKeepsSelection) {
  CvConfig cfg;
  cfg.candidates = {Architecture::symmetric(8, 2, 2), Architecture::symmetric(16, 4, 2), Architecture::symmetric(4, 2, 2)};
  const std::map<std::string, double> base{{"8:2:2", 2.5}, {"16:4:2", 2.25}, {"4:2:2", 2.75}};
  const Dataset d = small_task(4);
  const auto a = architecture_search(d, cfg, TrainConfig{}, table_scorer(base));
  for (double s : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_EQ(architecture_search(d, cfg, TrainConfig{}, table_scorer(base, s)).best, a.best);
  }
}

TEST(Search, DefaultGridAndParameterCount) {
  const auto grid = default_candidates();
  ASSERT_EQ(grid.size(), 6u);
  for (const auto& a : grid) EXPECT_TRUE(a.is_symmetric());
  const auto a = Architecture::symmetric(16, 10, 5);
  const VosModel m = make_vos_model(std::vector<FeatureKind>(3, FeatureKind::kContinuous), a, 0);
  EXPECT_EQ(parameter_count(a, 3), m.parameter_count());
}

Dataset bench_task(std::uint64_t seed) {
  testing::GaussianBlobs spec;
  spec.majority = 300;
  spec.minority = 30;
  spec.correlation = 0.9;
  spec.minority_sd = 0.5;
  return testing::gaussian_blobs(spec, seed);
}

BenchmarkConfig fast_config(std::uint64_t seed) {
  BenchmarkConfig cfg;
  cfg.seed = seed;
  cfg.vos_train.epochs = 5;
  cfg.mlp.train.epochs = 5;
  return cfg;
}

TEST(Benchmark, RowLayoutAndF1Identity) {
  const auto res = run_benchmark(bench_task(1), fast_config(1));
  ASSERT_EQ(res.rows.size(), (3u + 1) * 2);
  const std::vector<std::string> names{"LR", "VOS+LR", "SMOTE+LR", "ADASYN+LR", "MLP", "VOS+MLP", "SMOTE+MLP", "ADASYN+MLP"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(res.rows[i].method, names[i]);
    const auto& m = res.rows[i].metrics;
    EXPECT_NEAR(m.f1, f1_score(m.precision, m.recall), 1e-15);
    EXPECT_EQ(m.predicted_positives, m.counts.tp + m.counts.fp);
    EXPECT_EQ(m.counts.total(), res.test_ids.size());
  }
  EXPECT_EQ(res.find("LR")->synthetic_rows, 0u);
  EXPECT_GT(res.find("SMOTE+LR")->synthetic_rows, 0u);
  EXPECT_EQ(res.vos_history.size(), 5u);
}

TEST(Benchmark, NoneRowIsPlainClassifier) {
  const Dataset d = bench_task(2);
  BenchmarkConfig cfg = fast_config(2);
  cfg.oversamplers = {Oversampler::kSmote};
  cfg.classifiers = {ClassifierKind::kLogReg};
  const auto res = run_benchmark(d, cfg);
  ASSERT_EQ(res.rows.size(), 2u);

  const auto split = split_indices(d, cfg.test_fraction, cfg.seed);
  Dataset train = d.subset(split.train), test = d.subset(split.test);
  const auto scaler = fit_scaler(train);
  train = apply_scaler(scaler, train);
  test = apply_scaler(scaler, test);
  const auto model = logreg_fit(train.features, train.labels, train.weights, cfg.logreg);
  const auto expect = compute_metrics(logreg_predict(model, test.features), test.labels);
  EXPECT_EQ(res.rows[0].metrics.f1, expect.f1);
  EXPECT_EQ(res.rows[0].metrics.accuracy, expect.accuracy);
  EXPECT_EQ(res.rows[0].metrics.predicted_positives, expect.predicted_positives);
}

TEST(Benchmark, OversamplersNeverSeeTestRows) {
  const Dataset d = bench_task(3);
  const auto res = run_benchmark(d, fast_config(3));
  ASSERT_EQ(res.oversampler_inputs.size(), 3u);
  const std::set<std::size_t> test(res.test_ids.begin(), res.test_ids.end());
  for (const auto& ids : res.oversampler_inputs)
    for (std::size_t id : ids) EXPECT_FALSE(test.count(id));
  EXPECT_NO_THROW(assert_test_isolation(res.train_ids, res.test_ids));
  std::vector<std::size_t> leaked = res.train_ids;
  leaked.push_back(res.test_ids.front());
  EXPECT_THROW(assert_test_isolation(leaked, res.test_ids), LeakageError);
  std::vector<std::size_t> synthetic{kSyntheticRowId};
  EXPECT_NO_THROW(assert_test_isolation(synthetic, res.test_ids));
}

TEST(Benchmark, ExplicitTestIndices) {
  testing::GaussianBlobs spec;
  spec.majority = 200;
  spec.minority = 20;
  testing::GaussianBlobs test_spec = spec;
  test_spec.majority = 100;
  test_spec.minority = 10;
  auto [d, test_idx] = testing::blobs_with_test(spec, test_spec, 4);
  BenchmarkConfig cfg = fast_config(4);
  cfg.test_indices = test_idx;
  cfg.oversamplers = {Oversampler::kSmote};
  const auto res = run_benchmark(d, cfg);
  EXPECT_EQ(res.test_ids, test_idx);
  EXPECT_EQ(res.train_ids.size(), 220u);
  EXPECT_EQ(res.rows.front().metrics.counts.total(), 110u);
}

TEST(Benchmark, DeterministicTables) {
  const Dataset d = bench_task(5);
  std::ostringstream a, b, ja, jb;
  const auto r1 = run_benchmark(d, fast_config(5));
  const auto r2 = run_benchmark(d, fast_config(5));
  write_results_csv(a, r1.rows);
  write_results_csv(b, r2.rows);
  write_results_jsonl(ja, r1.rows);
  write_results_jsonl(jb, r2.rows);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(ja.str(), jb.str());
}

TEST(Benchmark, SerialisedTables) {
  const auto res = run_benchmark(bench_task(6), fast_config(6));
  std::ostringstream csv, jsonl;
  write_results_csv(csv, res.rows);
  write_results_jsonl(jsonl, res.rows);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,accuracy,precision,recall,f1,predicted");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
  }
  EXPECT_EQ(n, res.rows.size());
  std::istringstream jin(jsonl.str());
  std::size_t i = 0;
  while (std::getline(jin, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["method"], res.rows[i].method);
    EXPECT_EQ(j["f1"].get<double>(), res.rows[i].metrics.f1);
    ++i;
  }
  EXPECT_EQ(i, res.rows.size());
}

}  // namespace
}  // namespace vos
