#pragma once

// Dense feed-forward networks on Eigen: forward/backward passes, softmax
// cross-entropy, and a momentum SGD optimizer. Everything is templated on the
// scalar type; the rest of the library uses the double aliases at the bottom.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "selectnet/errors.hpp"

namespace selectnet {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { Identity, ReLU, Sigmoid, Softmax };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;     // out
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct LayerSpec {
  int width;
  Activation activation;
};

template <typename Scalar>
class MlpModel {
 public:
  MlpModel() = default;

  /// Builds a network with Glorot-uniform weights and zero biases drawn from
  /// `seed`. Softmax is only accepted on the last layer.
  static MlpModel build(int input_dim, std::span<const LayerSpec> layers, std::uint64_t seed) {
    if (input_dim <= 0) throw ConfigError("input dimension must be positive");
    if (layers.empty()) throw ConfigError("network needs at least one layer");
    MlpModel model;
    model.seed_ = seed;
    std::mt19937_64 rng(seed);
    int in = input_dim;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& spec = layers[k];
      if (spec.width <= 0) throw ConfigError("layer width must be positive");
      if (spec.activation == Activation::Softmax && k + 1 != layers.size())
        throw ConfigError("softmax is only allowed on the final layer");
      const double limit = std::sqrt(6.0 / static_cast<double>(in + spec.width));
      std::uniform_real_distribution<double> dist(-limit, limit);
      DenseLayer<Scalar> layer;
      layer.weights.resize(spec.width, in);
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = static_cast<Scalar>(dist(rng));
      layer.bias = VectorX<Scalar>::Zero(spec.width);
      layer.activation = spec.activation;
      model.layers_.push_back(std::move(layer));
      in = spec.width;
    }
    return model;
  }

  /// Wraps hand-built layers; checks the dimension chain.
  static MlpModel from_layers(std::vector<DenseLayer<Scalar>> layers, std::uint64_t seed = 0) {
    if (layers.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.bias.size() != l.weights.rows()) throw ConfigError("bias length must equal weight rows");
      if (k + 1 < layers.size()) {
        if (l.activation == Activation::Softmax)
          throw ConfigError("softmax is only allowed on the final layer");
        if (layers[k + 1].in_dim() != l.out_dim())
          throw ConfigError("layer " + std::to_string(k + 1) + " input does not match previous output");
      }
    }
    MlpModel model;
    model.layers_ = std::move(layers);
    model.seed_ = seed;
    return model;
  }

  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }

  /// Mutable access invalidates outstanding forward caches.
  DenseLayer<Scalar>& layer(std::size_t k) {
    ++revision_;
    return layers_.at(k);
  }

  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }
  Activation output_activation() const { return layers_.back().activation; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t revision() const { return revision_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

 private:
  template <typename S>
  friend class Sgd;

  std::vector<DenseLayer<Scalar>> layers_;
  std::uint64_t seed_ = 0;
  std::uint64_t revision_ = 0;
};

/// Per-layer inputs and outputs of one forward pass.
template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;       // input to layer k
  std::vector<MatrixX<Scalar>> activations;  // output of layer k
  const MlpModel<Scalar>* model = nullptr;
  std::uint64_t revision = 0;

  const MatrixX<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar>
struct Gradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;

  static Gradients zeros_like(const MlpModel<Scalar>& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
      g.weights.push_back(MatrixX<Scalar>::Zero(l.weights.rows(), l.weights.cols()));
      g.bias.push_back(VectorX<Scalar>::Zero(l.bias.size()));
    }
    return g;
  }
};

namespace detail {

template <typename Scalar>
void apply_activation(MatrixX<Scalar>& z, Activation act) {
  switch (act) {
    case Activation::Identity:
      break;
    case Activation::ReLU:
      z = z.cwiseMax(Scalar(0));
      break;
    case Activation::Sigmoid:
      // Split by sign so exp never overflows.
      z = z.unaryExpr([](Scalar v) {
        if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
        const Scalar e = std::exp(v);
        return e / (Scalar(1) + e);
      });
      break;
    case Activation::Softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
      }
      break;
  }
}

// dL/dZ from dL/dA for the given activation, where A is the layer output.
template <typename Scalar>
MatrixX<Scalar> activation_backward(const MatrixX<Scalar>& a, const MatrixX<Scalar>& grad_a,
                                    Activation act) {
  switch (act) {
    case Activation::Identity:
      return grad_a;
    case Activation::ReLU:
      return (a.array() > Scalar(0)).select(grad_a, Scalar(0));
    case Activation::Sigmoid:
      return (grad_a.array() * a.array() * (Scalar(1) - a.array())).matrix();
    case Activation::Softmax: {
      // Jacobian-vector product: a * (g - <g, a>) per row.
      const VectorX<Scalar> dots = (grad_a.array() * a.array()).rowwise().sum();
      MatrixX<Scalar> out = grad_a;
      out.colwise() -= dots;
      return (out.array() * a.array()).matrix();
    }
  }
  return grad_a;
}

template <typename Scalar>
void check_cache(const MlpModel<Scalar>& model, const ForwardCache<Scalar>& cache) {
  if (cache.model != &model || cache.revision != model.revision() ||
      cache.activations.size() != model.num_layers())
    throw UsageError("forward cache does not belong to the current model state");
}

template <typename Scalar>
Gradients<Scalar> backward_from_preactivation(const MlpModel<Scalar>& model,
                                              const ForwardCache<Scalar>& cache,
                                              MatrixX<Scalar> delta) {
  const auto& layers = model.layers();
  Gradients<Scalar> grads;
  grads.weights.resize(layers.size());
  grads.bias.resize(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    grads.weights[k].noalias() = delta.transpose() * cache.inputs[k];
    grads.bias[k] = delta.colwise().sum().transpose();
    if (k == 0) break;
    MatrixX<Scalar> grad_prev = delta * layers[k].weights;
    delta = activation_backward<Scalar>(cache.activations[k - 1], grad_prev,
                                        layers[k - 1].activation);
  }
  return grads;
}

}  // namespace detail

/// Runs the network on a batch (one sample per row) and keeps every layer's
/// input and output for a subsequent backward pass.
template <typename Scalar>
ForwardCache<Scalar> forward(const MlpModel<Scalar>& model, const MatrixX<Scalar>& batch) {
  if (model.num_layers() == 0) throw ConfigError("empty model");
  if (batch.cols() != model.input_dim())
    throw ConfigError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                      std::to_string(model.input_dim()));
  ForwardCache<Scalar> cache;
  cache.model = &model;
  cache.revision = model.revision();
  cache.inputs.reserve(model.num_layers());
  cache.activations.reserve(model.num_layers());
  const MatrixX<Scalar>* x = &batch;
  for (const auto& layer : model.layers()) {
    cache.inputs.push_back(*x);
    MatrixX<Scalar> z = *x * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    detail::apply_activation(z, layer.activation);
    if (!z.allFinite()) throw std::runtime_error("non-finite activation in forward pass");
    cache.activations.push_back(std::move(z));
    x = &cache.activations.back();
  }
  return cache;
}

/// Forward pass without keeping intermediates.
template <typename Scalar>
MatrixX<Scalar> predict(const MlpModel<Scalar>& model, const MatrixX<Scalar>& batch) {
  return forward(model, batch).activations.back();
}

/// Backpropagates dL/d(output), the gradient with respect to the final
/// post-activation output.
template <typename Scalar>
Gradients<Scalar> backward(const MlpModel<Scalar>& model, const ForwardCache<Scalar>& cache,
                           const MatrixX<Scalar>& output_grad) {
  detail::check_cache(model, cache);
  const auto& out = cache.output();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw UsageError("output gradient shape does not match forward output");
  MatrixX<Scalar> delta =
      detail::activation_backward<Scalar>(out, output_grad, model.output_activation());
  return detail::backward_from_preactivation(model, cache, std::move(delta));
}

template <typename Scalar>
struct CrossEntropy {
  VectorX<Scalar> per_sample;
  Scalar mean = 0;
};

template <typename Scalar>
void check_one_hot(const MatrixX<Scalar>& labels) {
  for (Eigen::Index r = 0; r < labels.rows(); ++r) {
    int ones = 0;
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
      const Scalar v = labels(r, c);
      if (v == Scalar(1)) {
        ++ones;
      } else if (v != Scalar(0)) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw InputError("label row " + std::to_string(r) + " is not one-hot");
  }
}

/// -log(max(p_true, floor)) per row.
template <typename Scalar>
CrossEntropy<Scalar> cross_entropy_loss(const MatrixX<Scalar>& probs, const MatrixX<Scalar>& labels) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
    throw InputError("probabilities and labels differ in shape");
  check_one_hot(labels);
  CrossEntropy<Scalar> ce;
  ce.per_sample.resize(probs.rows());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index cls = 0;
    labels.row(r).maxCoeff(&cls);
    const Scalar p = std::max(probs(r, cls), static_cast<Scalar>(kProbabilityFloor));
    ce.per_sample(r) = -std::log(p);
  }
  ce.mean = probs.rows() > 0 ? ce.per_sample.mean() : Scalar(0);
  return ce;
}

template <typename Scalar>
MatrixX<Scalar> one_hot(std::span<const int> labels, Eigen::Index num_classes) {
  MatrixX<Scalar> y = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw InputError("label " + std::to_string(labels[i]) + " out of range");
    y(static_cast<Eigen::Index>(i), labels[i]) = Scalar(1);
  }
  return y;
}

/// Fused softmax + cross-entropy gradient of sum_i w_i * L_i, i.e.
/// w_i * (p_i - y_i) at the logits. Requires a softmax output layer.
template <typename Scalar>
Gradients<Scalar> softmax_cross_entropy_backward(const MlpModel<Scalar>& model,
                                                 const ForwardCache<Scalar>& cache,
                                                 const MatrixX<Scalar>& labels,
                                                 const VectorX<Scalar>& sample_weights) {
  detail::check_cache(model, cache);
  if (model.output_activation() != Activation::Softmax)
    throw UsageError("fused cross-entropy gradient needs a softmax output layer");
  const auto& probs = cache.output();
  if (labels.rows() != probs.rows() || labels.cols() != probs.cols() ||
      sample_weights.size() != probs.rows())
    throw UsageError("label or weight shape does not match forward output");
  MatrixX<Scalar> delta = probs - labels;
  delta.array().colwise() *= sample_weights.array();
  return detail::backward_from_preactivation(model, cache, std::move(delta));
}

/// sum_i w_i L_i divided by the number of strictly positive weights; zero
/// when no weight is positive.
template <typename Scalar>
Scalar weighted_mean_loss(std::span<const Scalar> losses, std::span<const Scalar> weights) {
  if (losses.size() != weights.size()) throw InputError("losses and weights differ in length");
  Scalar total = 0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (weights[i] < Scalar(0)) throw InputError("negative loss weight");
    if (weights[i] > Scalar(0)) {
      total += weights[i] * losses[i];
      ++active;
    }
  }
  return active == 0 ? Scalar(0) : total / static_cast<Scalar>(active);
}

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  }
};

/// Momentum SGD: v <- momentum * v + g, p <- p - lr * v.
template <typename Scalar>
class Sgd {
 public:
  explicit Sgd(SgdConfig config) : config_(config) { config_.validate(); }

  void step(MlpModel<Scalar>& model, const Gradients<Scalar>& grads) {
    auto& layers = model.layers_;
    if (grads.weights.size() != layers.size() || grads.bias.size() != layers.size())
      throw UsageError("gradient layer count does not match model");
    if (velocity_.weights.size() != layers.size()) velocity_ = Gradients<Scalar>::zeros_like(model);
    const Scalar lr = static_cast<Scalar>(config_.learning_rate);
    const Scalar mu = static_cast<Scalar>(config_.momentum);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto& l = layers[k];
      if (grads.weights[k].rows() != l.weights.rows() || grads.weights[k].cols() != l.weights.cols() ||
          grads.bias[k].size() != l.bias.size())
        throw UsageError("gradient shape mismatch at layer " + std::to_string(k));
      velocity_.weights[k] = mu * velocity_.weights[k] + grads.weights[k];
      velocity_.bias[k] = mu * velocity_.bias[k] + grads.bias[k];
      l.weights -= lr * velocity_.weights[k];
      l.bias -= lr * velocity_.bias[k];
    }
    ++model.revision_;
  }

  void reset() { velocity_ = {}; }
  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  Gradients<Scalar> velocity_;
};

/// One plain step with a fresh momentum buffer.
template <typename Scalar>
void sgd_step(MlpModel<Scalar>& model, const Gradients<Scalar>& grads, const SgdConfig& config) {
  Sgd<Scalar> opt(config);
  opt.step(model, grads);
}

/// Index of the largest entry per row; ties go to the lowest index.
template <typename Scalar>
std::vector<int> argmax_rows(const MatrixX<Scalar>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Mlp = MlpModel<double>;

}  // namespace selectnet
