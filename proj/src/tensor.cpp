// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace ame::diff {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (num_elements(shape) != data.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " holds " +
                         std::to_string(num_elements(shape)) + " elements but " +
                         std::to_string(data.size()) + " values were given");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = num_elements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() needs a single-element tensor, got shape " + to_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw DimensionError("at(row, col) on shape " + to_string(shape()));
  return node_->value.at(row * node_->shape[1] + col);
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw std::logic_error("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = on;
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value, false); }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

namespace {

thread_local bool tls_grad_enabled = true;

// Iterative post-order DFS; reversing it gives a topological order from the loss.
std::vector<detail::Node*> tape_order(const Tensor& loss) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void sweep(const Tensor& loss, const std::vector<detail::Node*>& order) {
  for (auto* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

void check_scalar(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return tls_grad_enabled; }

void backward(const Tensor& loss) {
  check_scalar(loss);
  if (!loss.requires_grad()) return;
  sweep(loss, tape_order(loss));
}

std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> inputs) {
  check_scalar(loss);
  std::vector<std::vector<double>> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i].assign(inputs[i].numel(), 0.0);
  if (!loss.requires_grad()) return out;

  const auto order = tape_order(loss);
  std::vector<std::pair<detail::Node*, std::vector<double>>> saved;
  for (auto* node : order) {
    if (node->is_leaf()) saved.emplace_back(node, std::move(node->grad));
    node->grad.clear();
  }
  sweep(loss, order);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& g = inputs[i].node()->grad;
    if (!g.empty()) out[i] = g;
  }
  for (auto& [node, grad] : saved) node->grad = std::move(grad);
  return out;
}

}  // namespace ame::diff
