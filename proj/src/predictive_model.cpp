// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/predictive_model.hpp"

namespace ame {

using diff::Tensor;

Tensor Mlp::forward(const Tensor& x) const {
  Tensor out = x;
  for (const auto& layer : layers) out = diff::forward_dense(layer, out);
  return out;
}

void Mlp::collect(std::vector<diff::Parameter>& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto base = prefix + "." + std::to_string(l);
    out.push_back({base + ".weight", layers[l].weights});
    out.push_back({base + ".bias", layers[l].bias});
  }
}

Mlp make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
             diff::Activation hidden_activation, std::size_t out_dim,
             diff::Activation out_activation, diff::Rng& rng) {
  Mlp mlp;
  std::size_t prev = in_dim;
  for (auto width : hidden) {
    mlp.layers.push_back(diff::make_dense(prev, width, hidden_activation, rng));
    prev = width;
  }
  mlp.layers.push_back(diff::make_dense(prev, out_dim, out_activation, rng));
  return mlp;
}

MlpModel::MlpModel(Mlp network, Task task) : network_(std::move(network)), task_(task) {
  if (network_.layers.empty()) throw std::invalid_argument("MlpModel needs at least one layer");
}

Tensor MlpModel::predict(const Tensor& x) const {
  count_forward();
  return network_.forward(x);
}

std::vector<diff::Parameter> MlpModel::parameters() const {
  std::vector<diff::Parameter> out;
  network_.collect(out, "mlp");
  return out;
}

}  // namespace ame
