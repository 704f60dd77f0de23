// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ame/data.hpp"
#include "ame/nn.hpp"
#include "ame/predictive_model.hpp"

namespace ame {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Feature indices (0-based) owned by each expert.
using FeaturePartition = std::vector<std::vector<std::size_t>>;

/// Number of features covered by a partition; throws ConfigError naming overlapping
/// or missing indices.
std::size_t validate_partition(const FeaturePartition& partition);

/// One expert per singleton feature.
FeaturePartition singleton_partition(std::size_t num_features);

struct AmeConfig {
  FeaturePartition feature_partition;
  std::vector<std::size_t> expert_hidden{8};
  diff::Activation expert_activation = diff::Activation::kRelu;
  std::size_t gate_hidden = 8;
  std::vector<std::size_t> aux_hidden{16};
  diff::Activation aux_activation = diff::Activation::kRelu;
  Task task = Task::kRegression;
  std::size_t num_classes = 2;
  double alpha = 0.1;
  double aux_weight = 1.0;
  bool detach_targets = true;
  bool aux_grads_to_experts = true;
  std::uint64_t seed = 0;
  diff::OptimizerSettings optimizer;

  std::size_t num_experts() const { return feature_partition.size(); }
  std::size_t output_dim() const { return task == Task::kRegression ? 1 : num_classes; }

  bool operator==(const AmeConfig&) const;
};

/// Throws ConfigError on the first violated constraint.
void validate(const AmeConfig& config);

struct Expert {
  Mlp hidden;                     // features -> h_i
  diff::DenseLayer contribution;  // h_i -> c_i, identity activation
};

/// Attentive gate: u = tanh(W h_all + b), logit = u . context.
struct Gate {
  diff::DenseLayer projection;
  diff::Tensor context;
};

/// One batched forward pass. Rank-2 tensors are [batch x ...].
struct AmeOutput {
  diff::Tensor y;                           // task head applied
  diff::Tensor combined;                    // sum_i a_i c_i before the head
  diff::Tensor attention;                   // [batch x p]
  std::vector<diff::Tensor> contributions;  // p of [batch x out]
  std::vector<diff::Tensor> hidden;         // p of [batch x |h_i|]
  diff::Tensor h_all;
  std::vector<diff::Tensor> aux_excluded;   // p of [batch x out]
  diff::Tensor aux_all;                     // [batch x out]

  std::size_t batch() const { return attention.rows(); }
  std::size_t num_experts() const { return attention.cols(); }
};

/// Concatenation (h_1, c_1, ..., h_p, c_p) along columns.
diff::Tensor combined_state(std::span<const diff::Tensor> hidden,
                            std::span<const diff::Tensor> contributions);

/// Softmax over the per-gate logits; [batch x p].
diff::Tensor attention(std::span<const Gate> gates, const diff::Tensor& h_all);

class AmeModel : public PredictiveModel {
 public:
  explicit AmeModel(AmeConfig config);

  AmeModel(const AmeModel&) = delete;
  AmeModel& operator=(const AmeModel&) = delete;
  AmeModel(AmeModel&&) = default;
  AmeModel& operator=(AmeModel&&) = default;

  /// Accepts [batch x features] or a single [features] row. Without `include_aux`
  /// the auxiliary predictors are skipped and their fields stay empty.
  AmeOutput forward(const diff::Tensor& x, bool include_aux = true) const;
  diff::Tensor predict(const diff::Tensor& x) const override;

  std::size_t input_dim() const override { return num_features_; }
  Task task() const override { return config_.task; }
  const AmeConfig& config() const { return config_; }
  std::size_t num_experts() const { return experts_.size(); }

  const std::vector<Expert>& experts() const { return experts_; }
  const std::vector<Gate>& gates() const { return gates_; }
  const std::vector<Mlp>& aux_excluded() const { return aux_excluded_; }
  const Mlp& aux_all() const { return aux_all_; }

  /// Every trainable tensor with a stable dotted name.
  std::vector<diff::Parameter> parameters() const;
  std::vector<diff::Parameter> aux_parameters() const;

  /// Snapshot and restore of parameter values, in parameters() order.
  std::vector<std::vector<double>> values() const;
  void set_values(const std::vector<std::vector<double>>& values);

 private:
  AmeConfig config_;
  std::size_t num_features_ = 0;
  std::vector<Expert> experts_;
  std::vector<Gate> gates_;
  std::vector<Mlp> aux_excluded_;
  Mlp aux_all_;
};

AmeModel build_ame(const AmeConfig& config);

/// Attention read-out, [batch x p].
Matrix importance(const AmeOutput& output);

}  // namespace ame
