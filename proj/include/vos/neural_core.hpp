#pragma once

// Dense feed-forward networks with hand-written reverse-mode gradients and
// a plain SGD update. Every encoder, decoder and the MLP classifier is built
// from these pieces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vos/errors.hpp"
#include "vos/matrix.hpp"
#include "vos/random.hpp"

namespace vos {

enum class Activation : std::uint8_t { kIdentity = 0, kTanh = 1, kRelu = 2, kSigmoid = 3 };

inline double activate(Activation act, double v) {
  switch (act) {
    case Activation::kTanh:
      return std::tanh(v);
    case Activation::kRelu:
      return v > 0.0 ? v : 0.0;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-v));
    case Activation::kIdentity:
      break;
  }
  return v;
}

// Derivative expressed through the activation output y.
inline double activation_slope(Activation act, double y) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kRelu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kIdentity:
      break;
  }
  return 1.0;
}

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_shapes(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out_dim(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.data().size() + l.bias.size();
    return n;
  }

  void check_shapes() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": bias length does not match output width");
      }
      if (i + 1 < layers_.size() && layers_[i + 1].in_dim() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i + 1) + ": input width " +
                         std::to_string(layers_[i + 1].in_dim()) + " does not match previous output " +
                         std::to_string(l.out_dim()));
      }
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      for (double w : l.weights.data())
        if (!std::isfinite(w)) return false;
      for (double b : l.bias)
        if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Glorot-uniform initialisation, biases zero. `widths` lists input, hidden..., output.
inline DenseNet make_dense_net(std::span<const std::size_t> widths, Activation hidden, Activation output,
                               Rng& rng) {
  if (widths.size() < 2) throw ShapeError("make_dense_net: need at least input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t in = widths[i];
    const std::size_t out = widths[i + 1];
    if (in == 0 || out == 0) throw ShapeError("make_dense_net: zero layer width");
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    layer.activation = (i + 2 == widths.size()) ? output : hidden;
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& w : layer.weights.data()) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

inline DenseNet make_dense_net(std::initializer_list<std::size_t> widths, Activation hidden, Activation output,
                               Rng& rng) {
  std::vector<std::size_t> w(widths);
  return make_dense_net(std::span<const std::size_t>(w), hidden, output, rng);
}

/// Per-layer inputs and activations recorded by a forward pass.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;

  bool ready_for(const DenseNet& net) const noexcept {
    return !net.layers().empty() && inputs.size() == net.layers().size() &&
           outputs.size() == net.layers().size();
  }
  void clear() {
    inputs.clear();
    outputs.clear();
  }
};

inline std::vector<double> net_forward(const DenseNet& net, std::span<const double> x, ForwardCache* cache) {
  if (net.layers().empty()) throw UsageError("net_forward: network has no layers");
  if (x.size() != net.input_dim()) {
    throw ShapeError("net_forward: input has " + std::to_string(x.size()) + " values, network expects " +
                     std::to_string(net.input_dim()));
  }
  if (cache) cache->clear();
  std::vector<double> current(x.begin(), x.end());
  for (const auto& layer : net.layers()) {
    std::vector<double> next(layer.out_dim());
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      double acc = layer.bias[o];
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * current[i];
      next[o] = activate(layer.activation, acc);
    }
    if (cache) {
      cache->inputs.push_back(std::move(current));
      cache->outputs.push_back(next);
    }
    current = std::move(next);
  }
  return current;
}

inline std::vector<double> net_forward(const DenseNet& net, std::span<const double> x) {
  return net_forward(net, x, nullptr);
}

/// Partial derivatives aligned with the parameters of one DenseNet.
struct GradientTape {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;

  GradientTape() = default;
  explicit GradientTape(const DenseNet& net) {
    for (const auto& l : net.layers()) {
      weights.emplace_back(l.out_dim(), l.in_dim());
      bias.emplace_back(l.out_dim(), 0.0);
    }
  }

  bool congruent_with(const DenseNet& net) const noexcept {
    if (weights.size() != net.layers().size()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto& l = net.layers()[i];
      if (weights[i].rows() != l.out_dim() || weights[i].cols() != l.in_dim() || bias[i].size() != l.out_dim())
        return false;
    }
    return true;
  }

  void set_zero() {
    for (auto& w : weights) std::fill(w.data().begin(), w.data().end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
  }

  void scale(double factor) {
    for (auto& w : weights)
      for (double& v : w.data()) v *= factor;
    for (auto& b : bias)
      for (double& v : b) v *= factor;
  }

  GradientTape& operator+=(const GradientTape& other) {
    if (other.weights.size() != weights.size()) throw ShapeError("GradientTape: layer count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto& dst = weights[i].data();
      const auto& src = other.weights[i].data();
      if (dst.size() != src.size() || bias[i].size() != other.bias[i].size())
        throw ShapeError("GradientTape: layer " + std::to_string(i) + " shape mismatch");
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      for (std::size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += other.bias[i][j];
    }
    return *this;
  }

  /// Layer-major: weights row-major then bias, layer by layer.
  std::vector<double> flatten() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.insert(out.end(), weights[i].data().begin(), weights[i].data().end());
      out.insert(out.end(), bias[i].begin(), bias[i].end());
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      for (double v : w.data())
        if (!std::isfinite(v)) return false;
    for (const auto& b : bias)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Same ordering as GradientTape::flatten.
inline std::vector<double> flatten_parameters(const DenseNet& net) {
  std::vector<double> out;
  out.reserve(net.parameter_count());
  for (const auto& l : net.layers()) {
    out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

inline void assign_parameters(DenseNet& net, std::span<const double> values) {
  if (values.size() != net.parameter_count()) throw ShapeError("assign_parameters: wrong parameter count");
  std::size_t k = 0;
  for (auto& l : net.layers()) {
    for (double& w : l.weights.data()) w = values[k++];
    for (double& b : l.bias) b = values[k++];
  }
}

/// Accumulates d(output . upstream)/d(params) into `tape` and returns the
/// gradient with respect to the network input. With `upstream_is_preactivation`
/// the upstream is taken to be already multiplied by the last layer's slope.
inline std::vector<double> net_backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                                                   std::span<const double> upstream, GradientTape& tape,
                                                   bool upstream_is_preactivation = false) {
  if (!cache.ready_for(net)) throw UsageError("net_backward: no cached forward state for this network");
  if (upstream.size() != net.output_dim()) throw ShapeError("net_backward: upstream width mismatch");
  if (!tape.congruent_with(net)) throw ShapeError("net_backward: tape does not match network");

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const auto& layer = net.layers()[li];
    const auto& in = cache.inputs[li];
    const auto& out = cache.outputs[li];
    if (in.size() != layer.in_dim() || out.size() != layer.out_dim())
      throw UsageError("net_backward: cached state was produced by a different network");
    if (!(upstream_is_preactivation && li + 1 == net.layers().size()))
      for (std::size_t o = 0; o < delta.size(); ++o) delta[o] *= activation_slope(layer.activation, out[o]);

    std::vector<double> prev(layer.in_dim(), 0.0);
    auto& gw = tape.weights[li];
    auto& gb = tape.bias[li];
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      const auto w = layer.weights.row(o);
      auto g = gw.row(o);
      for (std::size_t i = 0; i < layer.in_dim(); ++i) {
        g[i] += d * in[i];
        prev[i] += d * w[i];
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

inline GradientTape net_backward(const DenseNet& net, const ForwardCache& cache, std::span<const double> upstream) {
  GradientTape tape(net);
  net_backward_accumulate(net, cache, upstream, tape);
  return tape;
}

/// Descends the minimised loss: p <- p - lr * grad.
inline void sgd_step(DenseNet& net, const GradientTape& tape, double learning_rate) {
  if (!tape.congruent_with(net)) throw ShapeError("sgd_step: tape does not match network");
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    for (double g : tape.weights[li].data())
      if (!std::isfinite(g)) throw TrainingError("sgd_step: non-finite gradient in layer " + std::to_string(li));
    for (double g : tape.bias[li])
      if (!std::isfinite(g)) throw TrainingError("sgd_step: non-finite gradient in layer " + std::to_string(li));
  }
  if (learning_rate == 0.0) return;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto& layer = net.layers()[li];
    auto& w = layer.weights.data();
    const auto& g = tape.weights[li].data();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= learning_rate * g[j];
    for (std::size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= learning_rate * tape.bias[li][j];
  }
}

/// SGD with optional heavy-ball momentum: v <- m v + g; p <- p - lr v.
/// With momentum 0 this is exactly sgd_step.
class SgdOptimizer {
 public:
  SgdOptimizer(const DenseNet& net, double learning_rate, double momentum = 0.0)
      : learning_rate_(learning_rate), momentum_(momentum), velocity_(net) {}

  void step(DenseNet& net, const GradientTape& tape) {
    if (momentum_ == 0.0) {
      sgd_step(net, tape, learning_rate_);
      return;
    }
    velocity_.scale(momentum_);
    velocity_ += tape;
    sgd_step(net, velocity_, learning_rate_);
  }

 private:
  double learning_rate_;
  double momentum_;
  GradientTape velocity_;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double momentum = 0.0;  // heavy-ball coefficient in [0, 1); 0 is plain SGD

  void validate(std::size_t dataset_size) const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ValidationError("TrainConfig: learning rate must be positive");
    if (batch_size == 0) throw ValidationError("TrainConfig: batch size must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("TrainConfig: momentum must lie in [0, 1)");
    if (batch_size > dataset_size)
      throw ValidationError("TrainConfig: batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                            std::to_string(dataset_size));
  }
};

/// Epoch-wise shuffled index batches; the last partial batch is kept.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace vos
