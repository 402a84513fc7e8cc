#pragma once

// ROC-family metrics, stratified K-fold splitting, cross-validated
// architecture selection and the oversampler x classifier benchmark.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vos/baselines.hpp"
#include "vos/classifiers.hpp"
#include "vos/dataset.hpp"
#include "vos/errors.hpp"
#include "vos/random.hpp"
#include "vos/vos_model.hpp"

namespace vos {

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted_positives = 0;
  ConfusionCounts counts;
  bool degenerate = false;  // some ratio had a zero denominator and was set to 0
};

/// Harmonic mean; 0 when both inputs are 0.
inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

inline ConfusionCounts confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw ShapeError("compute_metrics: predictions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], l = labels[i];
    if ((p != 0 && p != 1) || (l != 0 && l != 1)) throw ValidationError("compute_metrics: values must be 0 or 1");
    if (p == 1) {
      (l == 1 ? c.tp : c.fp)++;
    } else {
      (l == 1 ? c.fn : c.tn)++;
    }
  }
  return c;
}

inline MetricsReport metrics_from_counts(const ConfusionCounts& c) {
  if (c.total() == 0) throw ValidationError("compute_metrics: empty input");
  MetricsReport m;
  m.counts = c;
  m.predicted_positives = c.tp + c.fp;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  auto ratio = [&m](std::size_t num, std::size_t den) {
    if (den == 0) {
      m.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  if (m.precision + m.recall == 0.0) m.degenerate = true;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

inline MetricsReport compute_metrics(std::span<const int> preds, std::span<const int> labels) {
  return metrics_from_counts(confusion(preds, labels));
}

// ---------------------------------------------------------------------------
// K-fold

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

struct KFoldSplit {
  std::vector<Fold> folds;
  bool stratified = true;
  std::vector<std::string> warnings;
};

/// Stratified K folds: each class is shuffled and dealt round-robin, the fold
/// counter carrying over between classes so fold sizes differ by at most one.
inline KFoldSplit kfold_split(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("kfold_split: K must be at least 2");
  if (k > labels.size()) throw ValidationError("kfold_split: K exceeds dataset size");
  KFoldSplit out;
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i] == 1 ? 1 : 0].push_back(i);
  for (const auto& g : groups) {
    if (!g.empty() && g.size() < k) {
      out.stratified = false;
    }
  }
  if (!out.stratified) {
    out.warnings.push_back("kfold_split: a class has fewer than K members; folds are not stratified");
    groups = {std::vector<std::size_t>(labels.size())};
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  Rng rng = make_rng(seed, Stream::kFolds);
  std::vector<std::vector<std::size_t>> heldout(k);
  std::size_t next = 0;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    for (std::size_t i : g) {
      heldout[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& h : heldout) {
    std::sort(h.begin(), h.end());
    Fold f;
    f.heldout = h;
    std::vector<bool> in_heldout(labels.size(), false);
    for (std::size_t i : h) in_heldout[i] = true;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!in_heldout[i]) f.train.push_back(i);
    out.folds.push_back(std::move(f));
  }
  return out;
}

inline KFoldSplit kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed) {
  return kfold_split(std::span<const int>(d.labels), k, seed);
}

// ---------------------------------------------------------------------------
// Architecture search

struct CvConfig {
  std::size_t k = 5;
  std::vector<Architecture> candidates;
  std::uint64_t seed = 0;
};

/// hidden in {16, 40, 80} x (d_z1, d_z2) in {(10, 5), (20, 20)}.
inline std::vector<Architecture> default_candidates() {
  std::vector<Architecture> out;
  for (std::size_t h : {16, 40, 80})
    for (auto [z1, z2] : {std::pair<std::size_t, std::size_t>{10, 5}, {20, 20}})
      out.push_back(Architecture::symmetric(h, z1, z2));
  return out;
}

inline std::size_t parameter_count(const Architecture& a, std::size_t d_x) {
  auto mlp = [](std::size_t in, std::size_t hidden, std::size_t out) { return (in + 1) * hidden + (hidden + 1) * out; };
  return mlp(d_x, a.enc1_hidden, 2 * a.d_z1) + mlp(a.d_z1 + 1, a.enc2_hidden, 2 * a.d_z2) +
         mlp(a.d_z2 + 1, a.dec1_hidden, 2 * a.d_z1) + mlp(a.d_z1, a.dec2_hidden, 2 * d_x);
}

/// Loss of one (candidate, fold) job; lower is better.
using FoldScorer =
    std::function<double(const Architecture&, const Dataset& train, const Dataset& heldout, std::uint64_t seed)>;

/// Trains a VOS model on `train` and returns its mean -ELBO on `heldout`.
inline FoldScorer heldout_elbo_scorer(TrainConfig train_config) {
  return [train_config](const Architecture& arch, const Dataset& train, const Dataset& heldout,
                        std::uint64_t seed) {
    VosModel model = make_vos_model(train.kinds, arch, seed);
    TrainConfig tc = train_config;
    tc.seed = seed;
    tc.batch_size = std::min(tc.batch_size, train.size());
    train_vos(model, train, tc);
    Rng eval_rng = make_rng(seed, Stream::kEval);
    const auto e = elbo_loss(model, heldout.features, heldout.labels, eval_rng);
    return e.loss();
  };
}

struct CandidateScore {
  Architecture architecture;
  std::size_t parameters = 0;
  std::vector<double> fold_losses;
  double mean_loss = std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string failure;
};

struct SearchResult {
  Architecture best;
  std::size_t best_index = 0;
  std::vector<CandidateScore> candidates;
  std::vector<std::string> warnings;
};

/// Picks argmin over candidates of the mean heldout loss across K folds; ties
/// go to the candidate with fewer parameters, then to the earlier one.
inline SearchResult select_architecture(std::vector<CandidateScore> scores) {
  SearchResult r;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const auto& s = scores[c];
    if (s.failed) continue;
    if (!best || s.mean_loss < scores[*best].mean_loss ||
        (s.mean_loss == scores[*best].mean_loss && s.parameters < scores[*best].parameters))
      best = c;
  }
  if (!best) {
    std::string msg = "architecture_search: every candidate failed:";
    for (const auto& s : scores) msg += " [" + s.architecture.to_string() + ": " + s.failure + "]";
    throw SearchError(msg);
  }
  r.best_index = *best;
  r.best = scores[*best].architecture;
  r.candidates = std::move(scores);
  return r;
}

inline SearchResult architecture_search(const Dataset& data, const CvConfig& cfg, const TrainConfig& train_config,
                                        const FoldScorer& scorer = {}) {
  std::vector<Architecture> candidates = cfg.candidates.empty() ? default_candidates() : cfg.candidates;
  for (const auto& a : candidates) a.validate();
  if (candidates.size() == 1) {
    SearchResult r;
    r.best = candidates.front();
    r.candidates.push_back({candidates.front(), parameter_count(candidates.front(), data.dims()), {}, 0.0, false, {}});
    return r;
  }
  const FoldScorer score = scorer ? scorer : heldout_elbo_scorer(train_config);
  const auto split = kfold_split(data, cfg.k, cfg.seed);

  std::vector<CandidateScore> scores;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CandidateScore s;
    s.architecture = candidates[c];
    s.parameters = parameter_count(candidates[c], data.dims());
    try {
      for (std::size_t f = 0; f < split.folds.size(); ++f) {
        const auto& fold = split.folds[f];
        const double loss =
            score(candidates[c], data.subset(fold.train), data.subset(fold.heldout), derive_seed(cfg.seed, 100 + f));
        if (!std::isfinite(loss)) throw TrainingError("non-finite heldout loss on fold " + std::to_string(f + 1));
        s.fold_losses.push_back(loss);
      }
      s.mean_loss = std::accumulate(s.fold_losses.begin(), s.fold_losses.end(), 0.0) /
                    static_cast<double>(s.fold_losses.size());
    } catch (const TrainingError& e) {
      s.failed = true;
      s.failure = e.what();
    } catch (const NumericalError& e) {
      s.failed = true;
      s.failure = e.what();
    }
    scores.push_back(std::move(s));
  }
  auto r = select_architecture(std::move(scores));
  r.warnings = split.warnings;
  return r;
}

/// candidate,architecture,fold,loss rows plus one mean row per candidate (fold = "mean").
inline void write_search_log(std::ostream& out, const SearchResult& r) {
  out << "candidate,architecture,parameters,fold,loss\n";
  char buf[64];
  for (std::size_t c = 0; c < r.candidates.size(); ++c) {
    const auto& s = r.candidates[c];
    const std::string prefix =
        std::to_string(c) + "," + s.architecture.to_string() + "," + std::to_string(s.parameters) + ",";
    for (std::size_t f = 0; f < s.fold_losses.size(); ++f) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.fold_losses[f]);
      out << prefix << f << ',' << buf << '\n';
    }
    if (s.failed) {
      out << prefix << "mean,failed\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", s.mean_loss);
      out << prefix << "mean," << buf << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Benchmark

enum class Oversampler { kNone, kVos, kSmote, kAdasyn };
enum class ClassifierKind { kLogReg, kMlp };

inline const char* to_string(Oversampler o) {
  switch (o) {
    case Oversampler::kVos:
      return "VOS";
    case Oversampler::kSmote:
      return "SMOTE";
    case Oversampler::kAdasyn:
      return "ADASYN";
    case Oversampler::kNone:
      break;
  }
  return "none";
}

inline const char* to_string(ClassifierKind c) { return c == ClassifierKind::kLogReg ? "LR" : "MLP"; }

inline std::string method_name(Oversampler o, ClassifierKind c) {
  if (o == Oversampler::kNone) return to_string(c);
  return std::string(to_string(o)) + "+" + to_string(c);
}

struct BenchmarkConfig {
  std::vector<Oversampler> oversamplers{Oversampler::kVos, Oversampler::kSmote, Oversampler::kAdasyn};
  std::vector<ClassifierKind> classifiers{ClassifierKind::kLogReg, ClassifierKind::kMlp};
  double target_ratio = 1.0;
  double synthetic_weight = kDefaultSyntheticWeight;
  double test_fraction = 0.2;
  // When set, these rows form the test split instead of a stratified draw.
  std::optional<std::vector<std::size_t>> test_indices;
  std::uint64_t seed = 0;
  Architecture architecture = Architecture::symmetric(16, 4, 2);
  TrainConfig vos_train{.learning_rate = 0.01, .epochs = 60, .batch_size = 32, .seed = 0};
  LogRegOptions logreg{};
  MlpConfig mlp{};
  std::size_t smote_k = 5;
  std::size_t adasyn_k = 5;
};

struct BenchmarkRow {
  std::string method;
  Oversampler oversampler = Oversampler::kNone;
  ClassifierKind classifier = ClassifierKind::kLogReg;
  MetricsReport metrics;
  std::size_t synthetic_rows = 0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
  // Source row ids handed to each oversampler, for isolation audits.
  std::vector<std::vector<std::size_t>> oversampler_inputs;
  TrainHistory vos_history;
  std::vector<std::string> warnings;

  const BenchmarkRow* find(const std::string& method) const {
    for (const auto& r : rows)
      if (r.method == method) return &r;
    return nullptr;
  }
};

/// Throws LeakageError if any real row of `oversampler_input` is a test row.
inline void assert_test_isolation(std::span<const std::size_t> oversampler_input, std::span<const std::size_t> test_ids) {
  const std::unordered_set<std::size_t> test(test_ids.begin(), test_ids.end());
  for (std::size_t id : oversampler_input) {
    if (id != kSyntheticRowId && test.count(id))
      throw LeakageError("test row " + std::to_string(id) + " reached an oversampler");
  }
}

namespace detail {

inline Dataset augment_with(Oversampler o, const Dataset& train, const BenchmarkConfig& cfg, const VosModel* vos_model,
                            std::vector<std::string>& warnings) {
  if (o == Oversampler::kNone) return train;
  const int minority = train.minority_label();
  const std::size_t m_min = train.count(minority);
  const std::size_t m_maj = train.count(1 - minority);
  Dataset out = train;
  switch (o) {
    case Oversampler::kVos: {
      Rng rng = make_rng(cfg.seed, Stream::kSample);
      return oversample(train, *vos_model, cfg.target_ratio, rng, cfg.synthetic_weight);
    }
    case Oversampler::kSmote: {
      const auto s = smote(train, {cfg.smote_k, cfg.target_ratio, cfg.seed});
      out.append_synthetic(s.rows, s.label, cfg.synthetic_weight);
      return out;
    }
    case Oversampler::kAdasyn: {
      AdasynConfig ac;
      ac.k = cfg.adasyn_k;
      ac.beta = adasyn_beta_for_ratio(m_maj, m_min, cfg.target_ratio);
      ac.seed = cfg.seed;
      const auto a = adasyn(train, ac);
      warnings.insert(warnings.end(), a.synthetic.warnings.begin(), a.synthetic.warnings.end());
      out.append_synthetic(a.synthetic.rows, a.synthetic.label, cfg.synthetic_weight);
      return out;
    }
    case Oversampler::kNone:
      break;
  }
  return out;
}

inline std::vector<int> fit_predict(ClassifierKind kind, const Dataset& train, const Matrix& test_x,
                                    const BenchmarkConfig& cfg) {
  if (kind == ClassifierKind::kLogReg) {
    const auto m = logreg_fit(train.features, train.labels, train.weights, cfg.logreg);
    return logreg_predict(m, test_x);
  }
  MlpConfig mc = cfg.mlp;
  mc.train.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::kClassifier));
  const auto m = mlp_clf_fit(train.features, train.labels, train.weights, mc);
  return mlp_clf_predict(m, test_x);
}

}  // namespace detail

/// Every (oversampler or none) x classifier pair: oversample the training
/// split only, fit with sample weights, score on the untouched test split.
inline BenchmarkResult run_benchmark(const Dataset& data, const BenchmarkConfig& cfg) {
  data.validate();
  require_both_classes(data, "run_benchmark");
  BenchmarkResult res;

  SplitIndices split;
  if (cfg.test_indices) {
    split.test = *cfg.test_indices;
    std::sort(split.test.begin(), split.test.end());
    split.test.erase(std::unique(split.test.begin(), split.test.end()), split.test.end());
    std::vector<bool> is_test(data.size(), false);
    for (std::size_t i : split.test) {
      if (i >= data.size()) throw ValidationError("run_benchmark: test index out of range");
      is_test[i] = true;
    }
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!is_test[i]) split.train.push_back(i);
  } else {
    split = split_indices(data, cfg.test_fraction, cfg.seed);
  }
  Dataset train = data.subset(split.train);
  Dataset test = data.subset(split.test);
  require_both_classes(train, "run_benchmark (training split)");
  res.train_ids = train.row_ids;
  res.test_ids = test.row_ids;

  const ScalerParams scaler = fit_scaler(train);
  res.warnings.insert(res.warnings.end(), scaler.warnings.begin(), scaler.warnings.end());
  train = apply_scaler(scaler, std::move(train));
  test = apply_scaler(scaler, std::move(test));

  std::vector<Oversampler> methods{Oversampler::kNone};
  for (Oversampler o : cfg.oversamplers)
    if (std::find(methods.begin(), methods.end(), o) == methods.end()) methods.push_back(o);

  std::optional<VosModel> vos_model;
  std::vector<Dataset> augmented;
  for (Oversampler o : methods) {
    if (o != Oversampler::kNone) {
      assert_test_isolation(train.row_ids, res.test_ids);
      res.oversampler_inputs.push_back(train.row_ids);
    }
    if (o == Oversampler::kVos && !vos_model) {
      vos_model = make_vos_model(train.kinds, cfg.architecture, cfg.seed);
      TrainConfig tc = cfg.vos_train;
      tc.seed = cfg.seed;
      tc.batch_size = std::min(tc.batch_size, train.size());
      res.vos_history = train_vos(*vos_model, train, tc);
    }
    augmented.push_back(detail::augment_with(o, train, cfg, vos_model ? &*vos_model : nullptr, res.warnings));
  }

  for (ClassifierKind c : cfg.classifiers) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      BenchmarkRow row;
      row.oversampler = methods[m];
      row.classifier = c;
      row.method = method_name(methods[m], c);
      row.synthetic_rows = augmented[m].count(Provenance::kSynthetic);
      const auto preds = detail::fit_predict(c, augmented[m], test.features, cfg);
      row.metrics = compute_metrics(preds, test.labels);
      res.rows.push_back(std::move(row));
    }
  }
  return res;
}

/// method,accuracy,precision,recall,f1,predicted with 3-decimal rounding.
inline void write_results_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
  out << "method,accuracy,precision,recall,f1,predicted\n";
  char buf[160];
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f,%.3f,%.3f,%zu\n", r.method.c_str(), m.accuracy, m.precision, m.recall,
                  m.f1, m.predicted_positives);
    out << buf;
  }
}

/// One JSON object per row with full-precision values.
inline void write_results_jsonl(std::ostream& out, std::span<const BenchmarkRow> rows) {
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["predicted"] = m.predicted_positives;
    j["tp"] = m.counts.tp;
    j["fp"] = m.counts.fp;
    j["tn"] = m.counts.tn;
    j["fn"] = m.counts.fn;
    j["degenerate"] = m.degenerate;
    j["synthetic_rows"] = r.synthetic_rows;
    out << j.dump() << '\n';
  }
}

}  // namespace vos
