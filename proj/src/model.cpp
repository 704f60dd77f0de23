// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "ame/ops.hpp"

namespace ame {

using diff::Activation;
using diff::Tensor;

namespace {

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(values[i]);
  }
  return out;
}

// Stream ids used to fork the seed into per-component generators.
constexpr std::uint64_t kExpertStream = 1000;
constexpr std::uint64_t kGateStream = 2000;
constexpr std::uint64_t kAuxStream = 3000;

}  // namespace

std::size_t validate_partition(const FeaturePartition& partition) {
  if (partition.empty()) throw ConfigError("feature_partition must contain at least one group");
  std::map<std::size_t, std::size_t> seen;
  std::size_t max_index = 0;
  for (std::size_t g = 0; g < partition.size(); ++g) {
    if (partition[g].empty()) {
      throw ConfigError("feature_partition group " + std::to_string(g) + " is empty");
    }
    for (auto f : partition[g]) {
      ++seen[f];
      max_index = std::max(max_index, f);
    }
  }
  std::vector<std::size_t> overlapping;
  for (const auto& [f, count] : seen) {
    if (count > 1) overlapping.push_back(f);
  }
  if (!overlapping.empty()) {
    throw ConfigError("feature_partition groups overlap on feature indices: " + join(overlapping));
  }
  std::vector<std::size_t> missing;
  for (std::size_t f = 0; f <= max_index; ++f) {
    if (!seen.contains(f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    throw ConfigError("feature_partition does not cover feature indices: " + join(missing));
  }
  return max_index + 1;
}

FeaturePartition singleton_partition(std::size_t num_features) {
  FeaturePartition out(num_features);
  for (std::size_t f = 0; f < num_features; ++f) out[f] = {f};
  return out;
}

bool AmeConfig::operator==(const AmeConfig& o) const {
  return feature_partition == o.feature_partition && expert_hidden == o.expert_hidden &&
         expert_activation == o.expert_activation && gate_hidden == o.gate_hidden &&
         aux_hidden == o.aux_hidden && aux_activation == o.aux_activation && task == o.task &&
         num_classes == o.num_classes && alpha == o.alpha && aux_weight == o.aux_weight &&
         detach_targets == o.detach_targets && aux_grads_to_experts == o.aux_grads_to_experts &&
         seed == o.seed && optimizer.kind == o.optimizer.kind &&
         optimizer.learning_rate == o.optimizer.learning_rate && optimizer.beta1 == o.optimizer.beta1 &&
         optimizer.beta2 == o.optimizer.beta2 && optimizer.epsilon == o.optimizer.epsilon;
}

void validate(const AmeConfig& config) {
  validate_partition(config.feature_partition);
  if (config.expert_hidden.empty()) throw ConfigError("expert_hidden needs at least one layer");
  auto positive = [](const std::vector<std::size_t>& widths) {
    return std::all_of(widths.begin(), widths.end(), [](std::size_t w) { return w >= 1; });
  };
  if (!positive(config.expert_hidden)) throw ConfigError("expert_hidden widths must be >= 1");
  if (!positive(config.aux_hidden)) throw ConfigError("aux_hidden widths must be >= 1");
  if (config.gate_hidden < 1) throw ConfigError("gate_hidden must be >= 1");
  if (config.task == Task::kClassification && config.num_classes < 2) {
    throw ConfigError("num_classes must be >= 2 for classification");
  }
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(config.alpha));
  }
  if (!(config.aux_weight >= 0.0) || !std::isfinite(config.aux_weight)) {
    throw ConfigError("aux_weight must be a non-negative finite number");
  }
  if (!(config.optimizer.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

Tensor combined_state(std::span<const Tensor> hidden, std::span<const Tensor> contributions) {
  if (hidden.size() != contributions.size() || hidden.empty()) {
    throw diff::DimensionError("combined_state: " + std::to_string(hidden.size()) +
                               " hidden states for " + std::to_string(contributions.size()) +
                               " contributions");
  }
  std::vector<Tensor> parts;
  parts.reserve(hidden.size() * 2);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    parts.push_back(hidden[i]);
    parts.push_back(contributions[i]);
  }
  return diff::concat_cols(parts);
}

Tensor attention(std::span<const Gate> gates, const Tensor& h_all) {
  std::vector<Tensor> logits;
  logits.reserve(gates.size());
  for (const auto& gate : gates) {
    const Tensor u = diff::forward_dense(gate.projection, h_all);
    logits.push_back(diff::row_dot(u, gate.context));
  }
  return diff::softmax(diff::concat_cols(logits), 1);
}

AmeModel::AmeModel(AmeConfig config) : config_(std::move(config)) {
  validate(config_);
  num_features_ = validate_partition(config_.feature_partition);
  const std::size_t p = config_.num_experts();
  const std::size_t out = config_.output_dim();
  const diff::Rng root(config_.seed);

  std::size_t h_all_dim = 0;
  std::vector<std::size_t> block_dims;
  for (std::size_t i = 0; i < p; ++i) {
    diff::Rng rng = root.fork(kExpertStream + i);
    Expert expert;
    std::size_t prev = config_.feature_partition[i].size();
    for (auto width : config_.expert_hidden) {
      expert.hidden.layers.push_back(diff::make_dense(prev, width, config_.expert_activation, rng));
      prev = width;
    }
    expert.contribution = diff::make_dense(prev, out, Activation::kIdentity, rng);
    experts_.push_back(std::move(expert));
    block_dims.push_back(prev + out);
    h_all_dim += prev + out;
  }

  for (std::size_t i = 0; i < p; ++i) {
    diff::Rng rng = root.fork(kGateStream + i);
    Gate gate;
    gate.projection = diff::make_dense(h_all_dim, config_.gate_hidden, Activation::kTanh, rng);
    std::vector<double> context(config_.gate_hidden);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config_.gate_hidden));
    for (auto& v : context) v = rng.normal() * scale;
    gate.context = Tensor::vector(std::move(context), true);
    gates_.push_back(std::move(gate));
  }

  const Activation head =
      config_.task == Task::kRegression ? Activation::kIdentity : Activation::kSoftmax;
  for (std::size_t i = 0; i < p; ++i) {
    diff::Rng rng = root.fork(kAuxStream + i);
    const std::size_t in_dim = std::max<std::size_t>(1, h_all_dim - block_dims[i]);
    aux_excluded_.push_back(make_mlp(in_dim, config_.aux_hidden,
                                     config_.aux_activation, out, head, rng));
  }
  diff::Rng rng = root.fork(kAuxStream + p);
  aux_all_ = make_mlp(h_all_dim, config_.aux_hidden, config_.aux_activation, out, head, rng);
}

AmeOutput AmeModel::forward(const Tensor& x_in, bool include_aux) const {
  const Tensor x = x_in.rank() == 1 ? diff::reshape(x_in, {1, x_in.numel()}) : x_in;
  if (x.rank() != 2 || x.cols() != num_features_) {
    throw diff::DimensionError("AME forward: input shape " + diff::to_string(x_in.shape()) +
                               " does not match " + std::to_string(num_features_) + " features");
  }
  count_forward();

  const std::size_t p = experts_.size();
  AmeOutput out;
  out.hidden.reserve(p);
  out.contributions.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    const Tensor xi = diff::gather_cols(x, config_.feature_partition[i]);
    Tensor h = experts_[i].hidden.forward(xi);
    out.contributions.push_back(diff::forward_dense(experts_[i].contribution, h));
    out.hidden.push_back(std::move(h));
  }
  out.h_all = combined_state(out.hidden, out.contributions);
  out.attention = attention(gates_, out.h_all);

  Tensor combined;
  for (std::size_t i = 0; i < p; ++i) {
    const Tensor a_i = diff::slice_cols(out.attention, i, i + 1);
    const Tensor term = diff::mul_col(out.contributions[i], a_i);
    combined = i == 0 ? term : diff::add(combined, term);
  }
  out.combined = combined;
  out.y = config_.task == Task::kRegression ? combined : diff::softmax(combined, 1);

  if (!include_aux) return out;

  // Auxiliary predictors see either the live states or constant copies of them.
  std::vector<Tensor> aux_hidden = out.hidden;
  std::vector<Tensor> aux_contrib = out.contributions;
  if (!config_.aux_grads_to_experts) {
    for (auto& t : aux_hidden) t = t.detach();
    for (auto& t : aux_contrib) t = t.detach();
  }
  out.aux_all = aux_all_.forward(config_.aux_grads_to_experts ? out.h_all : out.h_all.detach());
  out.aux_excluded.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<Tensor> parts;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      parts.push_back(aux_hidden[j]);
      parts.push_back(aux_contrib[j]);
    }
    if (parts.empty()) {
      // p == 1: the excluded predictor gets a constant column and carries no information.
      parts.push_back(Tensor::zeros(diff::Shape{x.rows(), 1}));
    }
    out.aux_excluded.push_back(aux_excluded_[i].forward(diff::concat_cols(parts)));
  }
  return out;
}

Tensor AmeModel::predict(const Tensor& x) const { return forward(x, false).y; }

std::vector<diff::Parameter> AmeModel::parameters() const {
  std::vector<diff::Parameter> out;
  for (std::size_t i = 0; i < experts_.size(); ++i) {
    const auto base = "expert." + std::to_string(i);
    experts_[i].hidden.collect(out, base + ".hidden");
    out.push_back({base + ".contribution.weight", experts_[i].contribution.weights});
    out.push_back({base + ".contribution.bias", experts_[i].contribution.bias});
  }
  for (std::size_t i = 0; i < gates_.size(); ++i) {
    const auto base = "gate." + std::to_string(i);
    out.push_back({base + ".projection.weight", gates_[i].projection.weights});
    out.push_back({base + ".projection.bias", gates_[i].projection.bias});
    out.push_back({base + ".context", gates_[i].context});
  }
  auto aux = aux_parameters();
  out.insert(out.end(), aux.begin(), aux.end());
  return out;
}

std::vector<diff::Parameter> AmeModel::aux_parameters() const {
  std::vector<diff::Parameter> out;
  for (std::size_t i = 0; i < aux_excluded_.size(); ++i) {
    aux_excluded_[i].collect(out, "aux_excluded." + std::to_string(i));
  }
  aux_all_.collect(out, "aux_all");
  return out;
}

std::vector<std::vector<double>> AmeModel::values() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void AmeModel::set_values(const std::vector<std::vector<double>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) {
    throw diff::DimensionError("set_values: " + std::to_string(values.size()) + " tensors for " +
                               std::to_string(params.size()) + " parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto dst = params[k].tensor.mutable_data();
    if (dst.size() != values[k].size()) {
      throw diff::DimensionError("set_values: size mismatch for '" + params[k].name + "'");
    }
    std::copy(values[k].begin(), values[k].end(), dst.begin());
  }
}

AmeModel build_ame(const AmeConfig& config) { return AmeModel(config); }

Matrix importance(const AmeOutput& output) { return Matrix::from_tensor(output.attention); }

}  // namespace ame
