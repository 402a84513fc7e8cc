#pragma once

// Downstream classifiers scored on oversampled data: L2-regularised logistic
// regression and a one-hidden-layer MLP, both with per-sample weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vos/errors.hpp"
#include "vos/matrix.hpp"
#include "vos/neural_core.hpp"
#include "vos/random.hpp"

namespace vos {

/// Clamps a probability into the open interval (0, 1).
inline double open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(p, lo, hi);
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// -[y log s(z) + (1-y) log(1-s(z))]
inline double logistic_loss(int y, double z) { return softplus(z) - static_cast<double>(y) * z; }

namespace detail {

inline void check_supervised(const Matrix& x, std::span<const int> y, std::span<const double> w, const char* who) {
  if (x.rows() == 0) throw ValidationError(std::string(who) + ": empty training set");
  if (y.size() != x.rows() || w.size() != x.rows())
    throw ShapeError(std::string(who) + ": labels/weights length differs from row count");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw ValidationError(std::string(who) + ": labels must be 0 or 1");
    (v == 0 ? has0 : has1) = true;
  }
  if (!(has0 && has1)) throw ValidationError(std::string(who) + ": training labels contain a single class");
  for (double v : w)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(who) + ": weights must be finite and >= 0");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression

struct LogRegModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double inverse_regularization = 10.0;  // C
  bool converged = false;
  std::size_t iterations = 0;
};

struct LogRegOptions {
  double inverse_regularization = 10.0;
  double gradient_tolerance = 1e-6;
  std::size_t max_iterations = 10000;
};

/// sum_i w_i * logloss_i + |beta|^2 / (2C); the intercept is not penalised.
inline double logreg_objective(const Matrix& x, std::span<const int> y, std::span<const double> w,
                               std::span<const double> beta, double intercept, double c) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (w[i] == 0.0) continue;
    double z = intercept;
    const auto row = x.row(i);
    for (std::size_t j = 0; j < beta.size(); ++j) z += beta[j] * row[j];
    f += w[i] * logistic_loss(y[i], z);
  }
  double reg = 0.0;
  for (double b : beta) reg += b * b;
  return f + reg / (2.0 * c);
}

/// Gradient of logreg_objective: weights first, intercept last.
inline std::vector<double> logreg_gradient(const Matrix& x, std::span<const int> y, std::span<const double> w,
                                           std::span<const double> beta, double intercept, double c) {
  std::vector<double> g(beta.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (w[i] == 0.0) continue;
    double z = intercept;
    const auto row = x.row(i);
    for (std::size_t j = 0; j < beta.size(); ++j) z += beta[j] * row[j];
    const double r = w[i] * (sigmoid(z) - static_cast<double>(y[i]));
    for (std::size_t j = 0; j < beta.size(); ++j) g[j] += r * row[j];
    g.back() += r;
  }
  for (std::size_t j = 0; j < beta.size(); ++j) g[j] += beta[j] / c;
  return g;
}

namespace detail {

/// logreg_objective(to) - logreg_objective(from), computed term by term so the
/// difference keeps full relative precision near the optimum.
inline double logreg_objective_change(const Matrix& x, std::span<const int> y, std::span<const double> w,
                                      std::span<const double> from, std::span<const double> to, double c) {
  const std::size_t d = x.cols();
  double change = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (w[i] == 0.0) continue;
    double z = from[d], dz = to[d] - from[d];
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      z += from[j] * row[j];
      dz += (to[j] - from[j]) * row[j];
    }
    // softplus(z + dz) - softplus(z) = log1p(sigmoid(z) * expm1(dz)), stable for either sign of dz.
    const double dsp = dz >= 0.0 ? std::log1p(sigmoid(z) * std::expm1(dz))
                                 : -std::log1p(sigmoid(z + dz) * std::expm1(-dz));
    change += w[i] * (dsp - static_cast<double>(y[i]) * dz);
  }
  double reg = 0.0;
  for (std::size_t j = 0; j < d; ++j) reg += (to[j] - from[j]) * (to[j] + from[j]);
  return change + reg / (2.0 * c);
}

}  // namespace detail

/// Full-batch gradient descent with Armijo backtracking.
inline LogRegModel logreg_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                              const LogRegOptions& opt = {}) {
  detail::check_supervised(x, y, w, "logreg_fit");
  if (!(opt.inverse_regularization > 0.0)) throw ValidationError("logreg_fit: C must be positive");
  const double c = opt.inverse_regularization;
  const std::size_t d = x.cols();
  std::vector<double> theta(d + 1, 0.0);  // beta ++ intercept

  LogRegModel m;
  m.inverse_regularization = c;
  double step = 1.0;
  std::vector<double> trial(d + 1);
  for (m.iterations = 0; m.iterations < opt.max_iterations; ++m.iterations) {
    const auto g = logreg_gradient(x, y, w, std::span<const double>(theta.data(), d), theta[d], c);
    double gnorm2 = 0.0;
    for (double v : g) gnorm2 += v * v;
    if (std::sqrt(gnorm2) < opt.gradient_tolerance) {
      m.converged = true;
      break;
    }
    step *= 2.0;
    double change = 0.0;
    while (true) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = theta[j] - step * g[j];
      change = detail::logreg_objective_change(x, y, w, theta, trial, c);
      if (change <= -0.5 * step * gnorm2) break;
      step *= 0.5;
      if (step < 1e-300) break;
    }
    if (!(change < 0.0)) break;  // no descent possible at machine precision
    theta.swap(trial);
  }
  m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  m.intercept = theta[d];
  return m;
}

inline std::vector<double> logreg_predict_proba(const LogRegModel& m, const Matrix& x) {
  if (x.cols() != m.weights.size()) throw ShapeError("logreg_predict_proba: column count mismatch");
  std::vector<double> p(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = m.intercept;
    const auto row = x.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) z += m.weights[j] * row[j];
    p[i] = open_unit(sigmoid(z));
  }
  return p;
}

inline std::vector<int> threshold_predictions(std::span<const double> proba, double threshold = 0.5) {
  std::vector<int> out(proba.size());
  for (std::size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] >= threshold ? 1 : 0;
  return out;
}

inline std::vector<int> logreg_predict(const LogRegModel& m, const Matrix& x, double threshold = 0.5) {
  return threshold_predictions(logreg_predict_proba(m, x), threshold);
}

// ---------------------------------------------------------------------------
// MLP classifier

struct MlpConfig {
  std::vector<std::size_t> hidden = {32};
  TrainConfig train{.learning_rate = 0.05, .epochs = 200, .batch_size = 32, .seed = 0};
};

struct MlpClassifier {
  DenseNet net;  // tanh hidden layers, sigmoid scalar output
  TrainConfig config;
  std::vector<double> loss_history;
};

/// Batch loss is the weighted mean log-loss (normalised by the batch weight sum),
/// so rows with weight 0 have no influence. Batches whose weights sum to 0 are skipped.
inline MlpClassifier mlp_clf_fit(const Matrix& x, std::span<const int> y, std::span<const double> w,
                                 const MlpConfig& cfg = {}) {
  detail::check_supervised(x, y, w, "mlp_clf_fit");
  TrainConfig tc = cfg.train;
  tc.batch_size = std::min(tc.batch_size, x.rows());
  tc.validate(x.rows());

  std::vector<std::size_t> widths{x.cols()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  Rng init_rng = make_rng(tc.seed, Stream::kInit);
  MlpClassifier clf{make_dense_net(widths, Activation::kTanh, Activation::kSigmoid, init_rng), tc, {}};

  Rng shuffle_rng = make_rng(tc.seed, Stream::kShuffle);
  ForwardCache cache;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    double epoch_loss = 0.0, epoch_weight = 0.0;
    for (const auto& batch : make_batches(x.rows(), tc.batch_size, shuffle_rng)) {
      double wsum = 0.0;
      for (std::size_t i : batch) wsum += w[i];
      if (wsum <= 0.0) continue;
      GradientTape tape(clf.net);
      for (std::size_t i : batch) {
        if (w[i] == 0.0) continue;
        const double p = net_forward(clf.net, x.row(i), &cache)[0];
        const double scale = w[i] / wsum;
        const double upstream = scale * (p - static_cast<double>(y[i]));  // d logloss / d logit
        net_backward_accumulate(clf.net, cache, std::span<const double>(&upstream, 1), tape, true);
        const double pc = std::clamp(p, 1e-15, 1.0 - 1e-15);
        epoch_loss -= w[i] * (y[i] ? std::log(pc) : std::log(1.0 - pc));
      }
      epoch_weight += wsum;
      try {
        sgd_step(clf.net, tape, tc.learning_rate);
      } catch (const TrainingError& e) {
        throw TrainingError("mlp_clf_fit diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
    }
    clf.loss_history.push_back(epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0);
  }
  return clf;
}

inline std::vector<double> mlp_clf_predict_proba(const MlpClassifier& m, const Matrix& x) {
  if (x.cols() != m.net.input_dim()) throw ShapeError("mlp_clf_predict: column count mismatch");
  std::vector<double> p(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) p[i] = open_unit(net_forward(m.net, x.row(i))[0]);
  return p;
}

inline std::vector<int> mlp_clf_predict(const MlpClassifier& m, const Matrix& x, double threshold = 0.5) {
  return threshold_predictions(mlp_clf_predict_proba(m, x), threshold);
}

}  // namespace vos
