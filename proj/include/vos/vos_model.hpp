#pragma once

// Two-stage latent-variable VAE used for minority oversampling.
//
//   encoder   q(z1 | x)       enc1: x      -> (mu, gamma) over z1
//             q(z2 | z1, y)   enc2: z1 ++ y -> (mu, gamma) over z2
//   decoder   p(z1 | z2, y)   dec1: z2 ++ y -> (mu, gamma) over z1
//             p(x | z1)       dec2: z1     -> per-feature heads
//
// gamma is a log-variance; draws use z = exp(gamma / 2) * eps + mu.
// The objective per observation is
//   log p(x | z1) - KL(q(z2|z1,y) || N(0,I)) - KL(q(z1|x) || p(z1|z2,y))
// with z1, z2 each drawn once.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vos/dataset.hpp"
#include "vos/errors.hpp"
#include "vos/matrix.hpp"
#include "vos/neural_core.hpp"
#include "vos/random.hpp"

namespace vos {

inline constexpr double kLogVarianceMin = -10.0;
inline constexpr double kLogVarianceMax = 10.0;
inline constexpr double kRhoMin = 1e-6;
inline constexpr double kRhoMax = 1.0 - 1e-6;
inline constexpr double kDefaultSyntheticWeight = 0.2;

/// Diagonal Gaussian: mean and log-variance per dimension.
struct GaussianParams {
  std::vector<double> mean;
  std::vector<double> log_variance;

  GaussianParams() = default;
  GaussianParams(std::vector<double> mu, std::vector<double> gamma)
      : mean(std::move(mu)), log_variance(std::move(gamma)) {
    if (mean.size() != log_variance.size()) throw ShapeError("GaussianParams: mean/log-variance length mismatch");
  }

  std::size_t dim() const noexcept { return mean.size(); }

  static GaussianParams standard(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  }
};

struct BernoulliParams {
  std::vector<double> rho;
};

inline double clamp_log_variance(double g) { return std::clamp(g, kLogVarianceMin, kLogVarianceMax); }
inline double clamp_rho(double r) { return std::clamp(r, kRhoMin, kRhoMax); }

/// Splits a (mean ++ gamma) network output and clamps gamma.
inline GaussianParams gaussian_head(std::span<const double> raw) {
  if (raw.size() % 2 != 0) throw ShapeError("gaussian_head: output width must be even");
  const std::size_t d = raw.size() / 2;
  GaussianParams g;
  g.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(d));
  g.log_variance.resize(d);
  for (std::size_t i = 0; i < d; ++i) g.log_variance[i] = clamp_log_variance(raw[d + i]);
  return g;
}

inline std::vector<double> reparameterize(const GaussianParams& params, std::span<const double> eps) {
  if (eps.size() != params.dim())
    throw ShapeError("reparameterize: noise has " + std::to_string(eps.size()) + " values, expected " +
                     std::to_string(params.dim()));
  std::vector<double> z(params.dim());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = std::exp(0.5 * params.log_variance[i]) * eps[i] + params.mean[i];
  return z;
}

/// KL(q || p) for diagonal Gaussians in closed form.
inline double kl_diag_gaussians(const GaussianParams& q, const GaussianParams& p) {
  if (q.dim() != p.dim() || q.log_variance.size() != q.dim() || p.log_variance.size() != p.dim())
    throw ShapeError("kl_diag_gaussians: dimension mismatch");
  double kl = 0.0;
  for (std::size_t d = 0; d < q.dim(); ++d) {
    const double diff = q.mean[d] - p.mean[d];
    const double var_q = std::exp(q.log_variance[d]);
    kl += (var_q + diff * diff) * std::exp(-p.log_variance[d]) - 1.0 + p.log_variance[d] - q.log_variance[d];
  }
  return std::max(0.0, 0.5 * kl);
}

/// Decoded p(x | z1): Gaussian (mean, gamma) for continuous features and rho for binary ones.
/// Every vector has one entry per feature; entries of the other kind are unused.
struct FeatureHeads {
  std::vector<double> mean;
  std::vector<double> log_variance;
  std::vector<double> rho;
};

/// dec2 emits 2*d_x values: slot j is the mean (continuous) or logit (binary),
/// slot d_x + j the log-variance.
inline FeatureHeads decode_feature_heads(std::span<const double> raw, std::span<const FeatureKind> kinds) {
  const std::size_t dx = kinds.size();
  if (raw.size() != 2 * dx) throw ShapeError("decode_feature_heads: expected 2*d_x outputs");
  FeatureHeads h;
  h.mean.assign(dx, 0.0);
  h.log_variance.assign(dx, 0.0);
  h.rho.assign(dx, 0.5);
  for (std::size_t j = 0; j < dx; ++j) {
    if (kinds[j] == FeatureKind::kBinary) {
      h.rho[j] = clamp_rho(activate(Activation::kSigmoid, raw[j]));
    } else {
      h.mean[j] = raw[j];
      h.log_variance[j] = clamp_log_variance(raw[dx + j]);
    }
  }
  return h;
}

inline double gaussian_log_density(double x, double mean, double log_variance) {
  const double diff = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * log_variance - 0.5 * diff * diff * std::exp(-log_variance);
}

inline double reconstruction_log_lik(const FeatureHeads& heads, std::span<const double> x,
                                     std::span<const FeatureKind> kinds) {
  if (x.size() != kinds.size() || heads.mean.size() != kinds.size() || heads.log_variance.size() != kinds.size() ||
      heads.rho.size() != kinds.size())
    throw ShapeError("reconstruction_log_lik: heads, values and kinds must cover every feature");
  double ll = 0.0;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    if (kinds[j] == FeatureKind::kBinary) {
      if (x[j] != 0.0 && x[j] != 1.0)
        throw ValidationError("reconstruction_log_lik: binary feature " + std::to_string(j) + " has value " +
                              std::to_string(x[j]));
      const double r = heads.rho[j];
      ll += x[j] * std::log(r) + (1.0 - x[j]) * std::log(1.0 - r);
    } else {
      ll += gaussian_log_density(x[j], heads.mean[j], heads.log_variance[j]);
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------

struct Architecture {
  std::size_t enc1_hidden = 40;
  std::size_t enc2_hidden = 40;
  std::size_t dec1_hidden = 40;
  std::size_t dec2_hidden = 40;
  std::size_t d_z1 = 10;
  std::size_t d_z2 = 5;

  static Architecture symmetric(std::size_t hidden, std::size_t d_z1, std::size_t d_z2) {
    return {hidden, hidden, hidden, hidden, d_z1, d_z2};
  }

  /// enc1 mirrors dec2 and enc2 mirrors dec1.
  bool is_symmetric() const noexcept { return enc1_hidden == dec2_hidden && enc2_hidden == dec1_hidden; }

  void validate() const {
    if (enc1_hidden == 0 || enc2_hidden == 0 || dec1_hidden == 0 || dec2_hidden == 0 || d_z1 == 0 || d_z2 == 0)
      throw ValidationError("Architecture: all widths must be positive");
    if (!is_symmetric()) throw ValidationError("Architecture: encoder and decoder widths must mirror each other");
  }

  std::string to_string() const {
    if (enc1_hidden == enc2_hidden && enc1_hidden == dec1_hidden && enc1_hidden == dec2_hidden)
      return std::to_string(enc1_hidden) + ":" + std::to_string(d_z1) + ":" + std::to_string(d_z2);
    return std::to_string(enc1_hidden) + "/" + std::to_string(enc2_hidden) + ":" + std::to_string(d_z1) + ":" +
           std::to_string(d_z2);
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct VosDims {
  std::size_t d_x = 0;
  std::size_t d_z1 = 0;
  std::size_t d_z2 = 0;
  friend bool operator==(const VosDims&, const VosDims&) = default;
};

class VosModel {
 public:
  DenseNet enc1;
  DenseNet enc2;
  DenseNet dec1;
  DenseNet dec2;
  VosDims dims;
  std::vector<FeatureKind> kinds;
  bool trained = false;

  std::size_t parameter_count() const noexcept {
    return enc1.parameter_count() + enc2.parameter_count() + dec1.parameter_count() + dec2.parameter_count();
  }

  void check() const {
    if (kinds.size() != dims.d_x) throw ShapeError("VosModel: feature kinds do not cover d_x");
    for (const DenseNet* n : {&enc1, &enc2, &dec1, &dec2}) n->check_shapes();
    if (enc1.input_dim() != dims.d_x || enc1.output_dim() != 2 * dims.d_z1)
      throw ShapeError("VosModel: enc1 must map d_x -> 2*d_z1");
    if (enc2.input_dim() != dims.d_z1 + 1 || enc2.output_dim() != 2 * dims.d_z2)
      throw ShapeError("VosModel: enc2 must map d_z1+1 -> 2*d_z2");
    if (dec1.input_dim() != dims.d_z2 + 1 || dec1.output_dim() != 2 * dims.d_z1)
      throw ShapeError("VosModel: dec1 must map d_z2+1 -> 2*d_z1");
    if (dec2.input_dim() != dims.d_z1 || dec2.output_dim() != 2 * dims.d_x)
      throw ShapeError("VosModel: dec2 must map d_z1 -> 2*d_x");
  }

  friend bool operator==(const VosModel&, const VosModel&) = default;
};

inline VosModel make_vos_model(std::vector<FeatureKind> kinds, const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  if (kinds.empty()) throw ShapeError("make_vos_model: need at least one feature");
  Rng rng = make_rng(seed, Stream::kInit);
  VosModel m;
  m.dims = {kinds.size(), arch.d_z1, arch.d_z2};
  m.kinds = std::move(kinds);
  const auto& d = m.dims;
  m.enc1 = make_dense_net({d.d_x, arch.enc1_hidden, 2 * d.d_z1}, Activation::kTanh, Activation::kIdentity, rng);
  m.enc2 = make_dense_net({d.d_z1 + 1, arch.enc2_hidden, 2 * d.d_z2}, Activation::kTanh, Activation::kIdentity, rng);
  m.dec1 = make_dense_net({d.d_z2 + 1, arch.dec1_hidden, 2 * d.d_z1}, Activation::kTanh, Activation::kIdentity, rng);
  m.dec2 = make_dense_net({d.d_z1, arch.dec2_hidden, 2 * d.d_x}, Activation::kTanh, Activation::kIdentity, rng);
  m.check();
  return m;
}

/// Gradients for the four networks of a VosModel.
struct VosGradients {
  GradientTape enc1, enc2, dec1, dec2;

  explicit VosGradients(const VosModel& m) : enc1(m.enc1), enc2(m.enc2), dec1(m.dec1), dec2(m.dec2) {}

  void scale(double f) {
    for (GradientTape* t : {&enc1, &enc2, &dec1, &dec2}) t->scale(f);
  }

  /// enc1, enc2, dec1, dec2 order.
  std::vector<double> flatten() const {
    std::vector<double> out;
    for (const GradientTape* t : {&enc1, &enc2, &dec1, &dec2}) {
      const auto f = t->flatten();
      out.insert(out.end(), f.begin(), f.end());
    }
    return out;
  }
};

/// All parameters of a model, ordered like VosGradients::flatten.
inline std::vector<double> flatten_parameters(const VosModel& m) {
  std::vector<double> out;
  for (const DenseNet* n : {&m.enc1, &m.enc2, &m.dec1, &m.dec2}) {
    const auto f = flatten_parameters(*n);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

inline void assign_parameters(VosModel& m, std::span<const double> values) {
  if (values.size() != m.parameter_count()) throw ShapeError("assign_parameters: wrong parameter count");
  std::size_t offset = 0;
  for (DenseNet* n : {&m.enc1, &m.enc2, &m.dec1, &m.dec2}) {
    const std::size_t c = n->parameter_count();
    assign_parameters(*n, values.subspan(offset, c));
    offset += c;
  }
}

/// Batch means of the three objective terms. total = reconstruction - kl_z2 - kl_z1.
struct ElboBreakdown {
  double reconstruction = 0.0;
  double kl_z2 = 0.0;
  double kl_z1 = 0.0;
  double total = 0.0;

  static ElboBreakdown from_terms(double reconstruction, double kl_z2, double kl_z1) {
    return {reconstruction, kl_z2, kl_z1, reconstruction - kl_z2 - kl_z1};
  }
  /// Quantity minimised by training.
  double loss() const noexcept { return -total; }
};

/// Standard-normal draws used for one observation.
struct ElboNoise {
  std::vector<double> eps_z1;
  std::vector<double> eps_z2;

  static ElboNoise draw(const VosDims& dims, Rng& rng) {
    ElboNoise n;
    n.eps_z1.resize(dims.d_z1);
    n.eps_z2.resize(dims.d_z2);
    for (double& e : n.eps_z1) e = standard_normal(rng);
    for (double& e : n.eps_z2) e = standard_normal(rng);
    return n;
  }
};

namespace detail {

inline std::vector<double> with_label(std::span<const double> z, int y) {
  std::vector<double> v(z.begin(), z.end());
  v.push_back(static_cast<double>(y));
  return v;
}

inline double clamp_slope(double raw) { return (raw >= kLogVarianceMin && raw <= kLogVarianceMax) ? 1.0 : 0.0; }

/// Objective terms for one observation. When `grads` is given, accumulates
/// `weight` * d(-total)/d(params) into it.
inline ElboBreakdown elbo_single(const VosModel& m, std::span<const double> x, int y, const ElboNoise& noise,
                                 VosGradients* grads, double weight) {
  const auto& dims = m.dims;
  ForwardCache c_enc1, c_enc2, c_dec1, c_dec2;
  const bool need_grad = grads != nullptr;

  const auto raw1 = net_forward(m.enc1, x, need_grad ? &c_enc1 : nullptr);
  const GaussianParams q1 = gaussian_head(raw1);
  const auto z1 = reparameterize(q1, noise.eps_z1);

  const auto in2 = with_label(z1, y);
  const auto raw2 = net_forward(m.enc2, in2, need_grad ? &c_enc2 : nullptr);
  const GaussianParams q2 = gaussian_head(raw2);
  const auto z2 = reparameterize(q2, noise.eps_z2);

  const auto in3 = with_label(z2, y);
  const auto raw3 = net_forward(m.dec1, in3, need_grad ? &c_dec1 : nullptr);
  const GaussianParams p1 = gaussian_head(raw3);

  const auto raw4 = net_forward(m.dec2, z1, need_grad ? &c_dec2 : nullptr);
  const FeatureHeads heads = decode_feature_heads(raw4, m.kinds);

  const double recon = reconstruction_log_lik(heads, x, m.kinds);
  const double kl2 = kl_diag_gaussians(q2, GaussianParams::standard(dims.d_z2));
  const double kl1 = kl_diag_gaussians(q1, p1);
  if (!std::isfinite(recon)) throw NumericalError("elbo: reconstruction term is not finite");
  if (!std::isfinite(kl2)) throw NumericalError("elbo: kl_z2 term is not finite");
  if (!std::isfinite(kl1)) throw NumericalError("elbo: kl_z1 term is not finite");
  const auto out = ElboBreakdown::from_terms(recon, kl2, kl1);
  if (!need_grad) return out;

  // Reverse pass on loss = -recon + kl2 + kl1.
  const std::size_t dx = dims.d_x, dz1 = dims.d_z1, dz2 = dims.d_z2;

  // -recon wrt dec2 outputs.
  std::vector<double> g_raw4(2 * dx, 0.0);
  for (std::size_t j = 0; j < dx; ++j) {
    if (m.kinds[j] == FeatureKind::kBinary) {
      const double s = activate(Activation::kSigmoid, raw4[j]);
      if (s >= kRhoMin && s <= kRhoMax) g_raw4[j] = -(x[j] - s);
    } else {
      const double inv_var = std::exp(-heads.log_variance[j]);
      const double diff = x[j] - heads.mean[j];
      g_raw4[j] = -diff * inv_var;
      g_raw4[dx + j] = -(-0.5 + 0.5 * diff * diff * inv_var) * clamp_slope(raw4[dx + j]);
    }
  }
  for (double& g : g_raw4) g *= weight;
  auto g_z1 = net_backward_accumulate(m.dec2, c_dec2, g_raw4, grads->dec2);

  // kl1 = KL(q1 || p1).
  std::vector<double> g_mu1(dz1), g_gamma1(dz1), g_raw3(2 * dz1);
  for (std::size_t d = 0; d < dz1; ++d) {
    const double inv_var_p = std::exp(-p1.log_variance[d]);
    const double var_q = std::exp(q1.log_variance[d]);
    const double diff = q1.mean[d] - p1.mean[d];
    g_mu1[d] = weight * diff * inv_var_p;
    g_gamma1[d] = weight * 0.5 * (var_q * inv_var_p - 1.0);
    g_raw3[d] = -weight * diff * inv_var_p;
    g_raw3[dz1 + d] = weight * 0.5 * (1.0 - (var_q + diff * diff) * inv_var_p) * clamp_slope(raw3[dz1 + d]);
  }
  const auto g_in3 = net_backward_accumulate(m.dec1, c_dec1, g_raw3, grads->dec1);

  // z2 feeds only dec1; kl2 = KL(q2 || N(0, I)).
  std::vector<double> g_raw2(2 * dz2);
  for (std::size_t d = 0; d < dz2; ++d) {
    const double g_z2 = g_in3[d];
    const double sd = std::exp(0.5 * q2.log_variance[d]);
    const double g_mu2 = weight * q2.mean[d] + g_z2;
    const double g_gamma2 = weight * 0.5 * (sd * sd - 1.0) + g_z2 * 0.5 * sd * noise.eps_z2[d];
    g_raw2[d] = g_mu2;
    g_raw2[dz2 + d] = g_gamma2 * clamp_slope(raw2[dz2 + d]);
  }
  const auto g_in2 = net_backward_accumulate(m.enc2, c_enc2, g_raw2, grads->enc2);
  for (std::size_t d = 0; d < dz1; ++d) g_z1[d] += g_in2[d];

  std::vector<double> g_raw1(2 * dz1);
  for (std::size_t d = 0; d < dz1; ++d) {
    const double sd = std::exp(0.5 * q1.log_variance[d]);
    g_raw1[d] = g_mu1[d] + g_z1[d];
    g_raw1[dz1 + d] = (g_gamma1[d] + g_z1[d] * 0.5 * sd * noise.eps_z1[d]) * clamp_slope(raw1[dz1 + d]);
  }
  net_backward_accumulate(m.enc1, c_enc1, g_raw1, grads->enc1);
  return out;
}

inline void check_batch(const VosModel& m, const Matrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw ValidationError("elbo: empty batch");
  if (x.rows() != y.size()) throw ShapeError("elbo: batch rows and labels differ in length");
  if (x.cols() != m.dims.d_x) throw ShapeError("elbo: batch width does not match model d_x");
  for (int label : y)
    if (label != 0 && label != 1) throw ValidationError("elbo: labels must be 0 or 1");
}

}  // namespace detail

/// Batch-mean objective and the gradient of the batch-mean loss (-total),
/// with noise supplied explicitly (one draw per row).
inline ElboBreakdown elbo_with_gradient(const VosModel& m, const Matrix& x, std::span<const int> y,
                                        std::span<const ElboNoise> noise, VosGradients* grads) {
  detail::check_batch(m, x, y);
  if (noise.size() != x.rows()) throw ShapeError("elbo: need one noise draw per row");
  const double w = 1.0 / static_cast<double>(x.rows());
  double recon = 0.0, kl2 = 0.0, kl1 = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto b = detail::elbo_single(m, x.row(i), y[i], noise[i], grads, w);
    recon += b.reconstruction;
    kl2 += b.kl_z2;
    kl1 += b.kl_z1;
  }
  return ElboBreakdown::from_terms(recon * w, kl2 * w, kl1 * w);
}

inline ElboBreakdown elbo_loss(const VosModel& m, const Matrix& x, std::span<const int> y, Rng& rng) {
  detail::check_batch(m, x, y);
  std::vector<ElboNoise> noise;
  noise.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) noise.push_back(ElboNoise::draw(m.dims, rng));
  return elbo_with_gradient(m, x, y, noise, nullptr);
}

struct EpochStats {
  double loss = 0.0;  // mean over batches of the batch-mean -ELBO
  double reconstruction = 0.0;
  double kl_z2 = 0.0;
  double kl_z1 = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

/// Mini-batch SGD on -ELBO. Updates `model` in place.
inline TrainHistory train_vos(VosModel& model, const Dataset& data, const TrainConfig& config) {
  model.check();
  data.validate();
  if (data.dims() != model.dims.d_x) throw ShapeError("train_vos: dataset width does not match model");
  if (data.kinds != model.kinds) throw ValidationError("train_vos: dataset feature kinds differ from model kinds");
  TrainHistory history;
  if (config.epochs == 0) return history;
  if (data.size() == 0) throw ValidationError("train_vos: empty dataset");
  config.validate(data.size());

  Rng shuffle_rng = make_rng(config.seed, Stream::kShuffle);
  Rng noise_rng = make_rng(config.seed, Stream::kNoise);
  VosGradients grads(model);
  SgdOptimizer opt_enc1(model.enc1, config.learning_rate, config.momentum);
  SgdOptimizer opt_enc2(model.enc2, config.learning_rate, config.momentum);
  SgdOptimizer opt_dec1(model.dec1, config.learning_rate, config.momentum);
  SgdOptimizer opt_dec2(model.dec2, config.learning_rate, config.momentum);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(data.size(), config.batch_size, shuffle_rng);
    EpochStats stats;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      Matrix bx(0, data.dims());
      std::vector<int> by;
      std::vector<ElboNoise> noise;
      for (std::size_t i : idx) {
        bx.append_row(data.features.row(i));
        by.push_back(data.labels[i]);
        noise.push_back(ElboNoise::draw(model.dims, noise_rng));
      }
      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1);
      ElboBreakdown e;
      grads = VosGradients(model);
      try {
        e = elbo_with_gradient(model, bx, by, noise, &grads);
        if (!std::isfinite(e.loss())) throw TrainingError("loss is not finite");
        opt_enc1.step(model.enc1, grads.enc1);
        opt_enc2.step(model.enc2, grads.enc2);
        opt_dec1.step(model.dec1, grads.dec1);
        opt_dec2.step(model.dec2, grads.dec2);
      } catch (const NumericalError& err) {
        throw TrainingError("train_vos diverged at " + where + ": " + err.what());
      } catch (const TrainingError& err) {
        throw TrainingError("train_vos diverged at " + where + ": " + err.what());
      }
      stats.loss += e.loss();
      stats.reconstruction += e.reconstruction;
      stats.kl_z2 += e.kl_z2;
      stats.kl_z1 += e.kl_z1;
    }
    const double nb = static_cast<double>(batches.size());
    stats.loss /= nb;
    stats.reconstruction /= nb;
    stats.kl_z2 /= nb;
    stats.kl_z1 /= nb;
    history.push_back(stats);
  }
  model.trained = true;
  return history;
}

/// Ancestral sampling: z2 ~ N(0, I), z1 ~ p(z1 | z2, y), x ~ p(x | z1).
/// Rows are in the model's (standardised) feature space.
inline Matrix sample_synthetic(const VosModel& model, int label, std::size_t count, Rng& rng) {
  if (!model.trained) throw UsageError("sample_synthetic: model has not been trained");
  if (label != 0 && label != 1) throw ValidationError("sample_synthetic: label must be 0 or 1");
  const auto& dims = model.dims;
  Matrix out(count, dims.d_x);
  std::vector<double> z2(dims.d_z2), eps1(dims.d_z1);
  for (std::size_t r = 0; r < count; ++r) {
    for (double& v : z2) v = standard_normal(rng);
    const GaussianParams p1 = gaussian_head(net_forward(model.dec1, detail::with_label(z2, label)));
    for (double& e : eps1) e = standard_normal(rng);
    const auto z1 = reparameterize(p1, eps1);
    const FeatureHeads heads = decode_feature_heads(net_forward(model.dec2, z1), model.kinds);
    for (std::size_t j = 0; j < dims.d_x; ++j) {
      if (model.kinds[j] == FeatureKind::kBinary) {
        out(r, j) = uniform01(rng) < heads.rho[j] ? 1.0 : 0.0;
      } else {
        out(r, j) = std::exp(0.5 * heads.log_variance[j]) * standard_normal(rng) + heads.mean[j];
      }
    }
  }
  return out;
}

/// Synthetic minority rows needed so that minority / majority >= ratio.
inline std::size_t synthetic_count_for_ratio(std::size_t majority, std::size_t minority, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("target ratio must lie in (0, 1]");
  const double target = std::ceil(ratio * static_cast<double>(majority) - 1e-9);
  const auto needed = static_cast<std::size_t>(std::max(0.0, target));
  return needed > minority ? needed - minority : 0;
}

/// Appends VOS-generated minority rows until the class ratio reaches `target_ratio`.
inline Dataset oversample(const Dataset& data, const VosModel& model, double target_ratio, Rng& rng,
                          double synthetic_weight = kDefaultSyntheticWeight) {
  require_both_classes(data, "oversample");
  if (!(synthetic_weight >= 0.0)) throw ValidationError("oversample: synthetic weight must be non-negative");
  const int minority = data.minority_label();
  const std::size_t needed = synthetic_count_for_ratio(data.count(1 - minority), data.count(minority), target_ratio);
  Dataset out = data;
  out.append_synthetic(sample_synthetic(model, minority, needed, rng), minority, synthetic_weight);
  return out;
}

}  // namespace vos
