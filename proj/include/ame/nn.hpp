// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ame/tensor.hpp"

namespace ame::diff {

enum class Activation { kIdentity, kTanh, kRelu, kSigmoid, kSoftmax };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

Tensor apply(Activation activation, const Tensor& x);

/// Seeded random source. Child streams derived with `fork` are independent of the
/// order in which siblings are drawn from.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  std::size_t index(std::size_t n);  // uniform in [0, n)
  Rng fork(std::uint64_t stream) const;
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

struct DenseLayer {
  Tensor weights;  // [out x in]
  Tensor bias;     // [out]
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

/// Glorot-uniform weights, zero bias, both trainable.
DenseLayer make_dense(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng);

Tensor forward_dense(const DenseLayer& layer, const Tensor& input);

// Losses. All reduce to a scalar mean; the *_rows variants keep one value per sample
// as a [batch x 1] tensor.
Tensor loss_mae(const Tensor& y_pred, const Tensor& y_true);
Tensor loss_mse(const Tensor& y_pred, const Tensor& y_true);
Tensor loss_cross_entropy(const Tensor& probs, const Tensor& targets);
Tensor mae_rows(const Tensor& y_pred, const Tensor& y_true);
Tensor cross_entropy_rows(const Tensor& probs, const Tensor& targets);

inline constexpr double kLogEpsilon = 1e-12;

struct Parameter {
  std::string name;
  Tensor tensor;
};

void zero_grads(std::span<const Parameter> params);

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings);

  /// Applies one update from the current gradients. Throws if any parameter has
  /// no gradient buffer; callers clear gradients afterwards.
  void step(std::span<const Parameter> params);
  void reset();

  const OptimizerSettings& settings() const { return settings_; }
  std::uint64_t steps() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  OptimizerSettings settings_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ame::diff
