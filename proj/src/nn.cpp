// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/nn.hpp"

#include <cmath>

#include "ame/ops.hpp"

namespace ame::diff {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::kIdentity, Activation::kTanh, Activation::kRelu, Activation::kSigmoid,
                 Activation::kSoftmax}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Tensor apply(Activation activation, const Tensor& x) {
  switch (activation) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return tanh(x);
    case Activation::kRelu: return relu(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kSoftmax: return softmax(x, x.rank() - 1);
  }
  return x;
}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::size_t Rng::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Rng Rng::fork(std::uint64_t stream) const {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

DenseLayer make_dense(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) throw DimensionError("dense layer extents must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::vector<double> w(in_dim * out_dim);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return DenseLayer{Tensor::matrix(out_dim, in_dim, std::move(w), true),
                    Tensor::zeros(Shape{out_dim}, true), activation};
}

Tensor forward_dense(const DenseLayer& layer, const Tensor& input) {
  return apply(layer.activation, linear(input, layer.weights, layer.bias));
}

namespace {

void require_same(const char* what, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

Tensor as_matrix_target(const Tensor& t) {
  if (t.rank() == 2) return t;
  if (t.rank() == 1) return Tensor::matrix(1, t.numel(), {t.data().begin(), t.data().end()});
  throw DimensionError("expected a rank-1 or rank-2 tensor, got " + to_string(t.shape()));
}

void check_probabilities(const Tensor& probs) {
  for (double v : probs.data()) {
    if (v < 0.0) throw NumericalError("cross-entropy: negative probability " + std::to_string(v));
  }
}

}  // namespace

Tensor mae_rows(const Tensor& y_pred, const Tensor& y_true) {
  require_same("mae", y_pred, y_true);
  auto diff = abs(sub(y_pred, y_true.detach()));
  if (diff.rank() != 2) throw DimensionError("mae_rows needs [batch x out], got " + to_string(diff.shape()));
  return scale(row_sum(diff), 1.0 / static_cast<double>(diff.cols()));
}

Tensor loss_mae(const Tensor& y_pred, const Tensor& y_true) {
  require_same("mae", y_pred, y_true);
  return mean(abs(sub(y_pred, y_true.detach())));
}

Tensor loss_mse(const Tensor& y_pred, const Tensor& y_true) {
  require_same("mse", y_pred, y_true);
  auto d = sub(y_pred, y_true.detach());
  return mean(mul(d, d));
}

Tensor cross_entropy_rows(const Tensor& probs, const Tensor& targets) {
  require_same("cross-entropy", probs, targets);
  check_probabilities(probs);
  if (probs.rank() != 2) {
    throw DimensionError("cross_entropy_rows needs [batch x classes], got " + to_string(probs.shape()));
  }
  auto logp = log(probs, kLogEpsilon);
  return scale(row_sum(mul(logp, targets.detach())), -1.0);
}

Tensor loss_cross_entropy(const Tensor& probs, const Tensor& targets) {
  require_same("cross-entropy", probs, targets);
  if (probs.rank() == 1) {
    // A single distribution; reshape without breaking the tape.
    check_probabilities(probs);
    auto logp = log(probs, kLogEpsilon);
    return scale(sum(mul(logp, targets.detach())), -1.0);
  }
  auto rows = cross_entropy_rows(probs, as_matrix_target(targets));
  return mean(rows);
}

void zero_grads(std::span<const Parameter> params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) {
    throw std::invalid_argument("optimizer learning_rate must be positive");
  }
}

void Optimizer::reset() {
  steps_ = 0;
  moments_.clear();
}

void Optimizer::step(std::span<const Parameter> params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw std::logic_error("optimizer step: parameter '" + p.name + "' has no gradient");
    }
  }
  ++steps_;
  const double lr = settings_.learning_rate;
  if (settings_.kind == OptimizerKind::kSgd) {
    for (const auto& p : params) {
      auto t = p.tensor;
      auto values = t.mutable_data();
      const auto g = t.grad();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
    }
    return;
  }
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (const auto& p : params) {
    auto t = p.tensor;
    auto values = t.mutable_data();
    const auto g = t.grad();
    auto& m = moments_[p.name];
    if (m.first.size() != values.size()) {
      m.first.assign(values.size(), 0.0);
      m.second.assign(values.size(), 0.0);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      m.first[i] = b1 * m.first[i] + (1.0 - b1) * g[i];
      m.second[i] = b2 * m.second[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m.first[i] / c1;
      const double v_hat = m.second[i] / c2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
    }
  }
}

}  // namespace ame::diff
