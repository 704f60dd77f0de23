// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ame/tensor.hpp"

namespace ame::diff {

// Elementwise arithmetic. Operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
// Natural log of (x + offset); throws NumericalError if any x + offset <= 0.
Tensor log(const Tensor& x, double offset = 0.0);
Tensor abs(const Tensor& x);

/// Same values under a new shape with the same element count.
Tensor reshape(const Tensor& x, Shape shape);

/// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x . W^T + b for x of shape [batch x in] (or [in]), W [out x in], b [out].
Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// [rows x cols] -> [rows x 1]
Tensor row_sum(const Tensor& x);

/// Column-wise concatenation of rank-2 tensors with equal row counts.
Tensor concat_cols(std::span<const Tensor> parts);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// Selected columns of a rank-2 tensor, in the given order.
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> columns);
/// [rows x 1] -> [rows x count] by repetition.
Tensor broadcast_cols(const Tensor& column, std::size_t count);

/// x[r, :] * s[r] for x [rows x k], s [rows x 1].
Tensor mul_col(const Tensor& x, const Tensor& s);
/// Per-row dot product with a shared vector: [rows x k] . [k] -> [rows x 1].
Tensor row_dot(const Tensor& x, const Tensor& v);

/// Tape node for an operation defined elsewhere. `backward` receives the output node
/// and accumulates into the grads of those parents that require them.
Tensor custom_op(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                 std::function<void(detail::Node&)> backward);

}  // namespace ame::diff
