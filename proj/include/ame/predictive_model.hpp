// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <string>
#include <vector>

#include "ame/data.hpp"
#include "ame/nn.hpp"

namespace ame {

/// Copyable atomic counter; copies start from the source's current count.
class PassCounter {
 public:
  PassCounter() = default;
  PassCounter(const PassCounter& other) : count_(other.load()) {}
  PassCounter& operator=(const PassCounter& other) {
    count_.store(other.load());
    return *this;
  }

  void increment() const { count_.fetch_add(1, std::memory_order_relaxed); }
  std::size_t load() const { return count_.load(std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::size_t> count_{0};
};

/// Anything an importance estimator can query. `predict` returns [batch x out]:
/// a single column for regression, class probabilities for classification. Every
/// call counts as one forward pass, whatever the batch size.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;

  virtual diff::Tensor predict(const diff::Tensor& x) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual Task task() const = 0;

  std::size_t forward_count() const { return forwards_.load(); }

 protected:
  void count_forward() const { forwards_.increment(); }

 private:
  PassCounter forwards_;
};

/// Stack of dense layers.
struct Mlp {
  std::vector<diff::DenseLayer> layers;

  diff::Tensor forward(const diff::Tensor& x) const;
  void collect(std::vector<diff::Parameter>& out, const std::string& prefix) const;
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

/// `hidden` widths share `hidden_activation`; a final layer maps to `out_dim`.
Mlp make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
             diff::Activation hidden_activation, std::size_t out_dim,
             diff::Activation out_activation, diff::Rng& rng);

/// Plain feed-forward network behind the PredictiveModel interface.
class MlpModel : public PredictiveModel {
 public:
  MlpModel(Mlp network, Task task);

  diff::Tensor predict(const diff::Tensor& x) const override;
  std::size_t input_dim() const override { return network_.in_dim(); }
  Task task() const override { return task_; }

  const Mlp& network() const { return network_; }
  std::vector<diff::Parameter> parameters() const;

 private:
  Mlp network_;
  Task task_;
};

}  // namespace ame
