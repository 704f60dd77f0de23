// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace ame::diff {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

// Builds the output node; the tape link is kept only when some operand needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool tracked = NoGradGuard::grad_enabled() &&
                       std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
  if (tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& x) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got shape " +
                         to_string(x.shape()));
  }
}

// Elementwise unary op given f(x) and df/dx expressed through (x, f(x)).
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x.node()}, [df](Node& self) {
    auto& parent = *self.parents[0];
    auto& g = parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * df(parent.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto& g = parent->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& parent = *self.parents[k];
      if (!parent.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& g = parent.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x, double offset) {
  for (double v : x.data()) {
    if (!(v + offset > 0.0)) {
      throw NumericalError("log: argument " + std::to_string(v + offset) + " is not positive");
    }
  }
  return unary(x, [offset](double v) { return std::log(v + offset); },
               [offset](double v, double) { return 1.0 / (v + offset); });
}

Tensor abs(const Tensor& x) {
  // Subgradient 0 at the kink.
  return unary(x, [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (num_elements(shape) != x.numel()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + to_string(a.shape()) + " . " +
                         to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  return make_result(Shape{m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& G = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * pb.value[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank2("linear weights", weights);
  const std::size_t out_dim = weights.rows(), in_dim = weights.cols();
  if (bias.numel() != out_dim) {
    throw DimensionError("linear: bias shape " + to_string(bias.shape()) +
                         " does not match weights " + to_string(weights.shape()));
  }
  const bool single = x.rank() == 1;
  if ((x.rank() != 1 && x.rank() != 2) || x.shape().back() != in_dim) {
    throw DimensionError("linear: input shape " + to_string(x.shape()) +
                         " does not match weights " + to_string(weights.shape()));
  }
  const std::size_t batch = single ? 1 : x.rows();
  std::vector<double> out(batch * out_dim);
  const auto X = x.data();
  const auto W = weights.data();
  const auto b = bias.data();
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = b[o];
      const double* wrow = W.data() + o * in_dim;
      const double* xrow = X.data() + r * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) acc += xrow[i] * wrow[i];
      out[r * out_dim + o] = acc;
    }
  }
  Shape shape = single ? Shape{out_dim} : Shape{batch, out_dim};
  return make_result(std::move(shape), std::move(out), {x.node(), weights.node(), bias.node()},
                     [batch, in_dim, out_dim](Node& self) {
                       auto& px = *self.parents[0];
                       auto& pw = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const auto& G = self.grad;
                       if (px.requires_grad) {
                         auto& gx = px.ensure_grad();
                         for (std::size_t r = 0; r < batch; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const double go = G[r * out_dim + o];
                             if (go == 0.0) continue;
                             const double* wrow = pw.value.data() + o * in_dim;
                             double* gxrow = gx.data() + r * in_dim;
                             for (std::size_t i = 0; i < in_dim; ++i) gxrow[i] += go * wrow[i];
                           }
                       }
                       if (pw.requires_grad) {
                         auto& gw = pw.ensure_grad();
                         for (std::size_t r = 0; r < batch; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const double go = G[r * out_dim + o];
                             if (go == 0.0) continue;
                             const double* xrow = px.value.data() + r * in_dim;
                             double* gwrow = gw.data() + o * in_dim;
                             for (std::size_t i = 0; i < in_dim; ++i) gwrow[i] += go * xrow[i];
                           }
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.ensure_grad();
                         for (std::size_t r = 0; r < batch; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) gb[o] += G[r * out_dim + o];
                       }
                     });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         to_string(x.shape()));
  }
  const std::size_t extent = x.shape()[axis];
  if (extent == 0) {
    throw DimensionError("softmax: empty axis " + std::to_string(axis) + " in shape " +
                         to_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * extent * inner + i;
      double max_v = in[base];
      for (std::size_t e = 1; e < extent; ++e) max_v = std::max(max_v, in[base + e * inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = std::exp(in[base + e * inner] - max_v);
        out[base + e * inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < extent; ++e) out[base + e * inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [outer, inner, extent](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * extent * inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < extent; ++e) {
          dot += self.grad[base + e * inner] * self.value[base + e * inner];
        }
        for (std::size_t e = 0; e < extent; ++e) {
          const std::size_t idx = base + e * inner;
          g[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(Shape{}, {total}, {x.node()}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor row_sum(const Tensor& x) {
  require_rank2("row_sum", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += x.data()[r * cols + c];
  return make_result(Shape{rows, 1}, std::move(out), {x.node()}, [rows, cols](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  for (const auto& p : parts) require_rank2("concat_cols", p);
  const std::size_t rows = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total_cols = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + to_string(parts.front().shape()) + " vs " +
                           to_string(p.shape()));
    }
    offsets.push_back(total_cols);
    total_cols += p.cols();
    parents.push_back(p.node());
  }
  std::vector<double> out(rows * total_cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].cols();
    const auto src = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.begin() + r * w, w, out.begin() + r * total_cols + offsets[k]);
  }
  return make_result(Shape{rows, total_cols}, std::move(out), std::move(parents),
                     [rows, total_cols, offsets](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& parent = *self.parents[k];
                         if (!parent.requires_grad) continue;
                         const std::size_t w = parent.shape[1];
                         auto& g = parent.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < w; ++c)
                             g[r * w + c] += self.grad[r * total_cols + offsets[k] + c];
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", x);
  if (begin > end || end > x.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for shape " + to_string(x.shape()));
  }
  std::vector<std::size_t> columns(end - begin);
  for (std::size_t c = begin; c < end; ++c) columns[c - begin] = c;
  return gather_cols(x, columns);
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> columns) {
  require_rank2("gather_cols", x);
  const std::size_t rows = x.rows(), cols = x.cols(), w = columns.size();
  for (auto c : columns) {
    if (c >= cols) {
      throw DimensionError("gather_cols: column " + std::to_string(c) + " out of range for shape " +
                           to_string(x.shape()));
    }
  }
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x.data()[r * cols + columns[j]];
  std::vector<std::size_t> cols_copy(columns.begin(), columns.end());
  return make_result(Shape{rows, w}, std::move(out), {x.node()},
                     [rows, cols, w, cols_copy](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < w; ++j)
                           g[r * cols + cols_copy[j]] += self.grad[r * w + j];
                     });
}

Tensor broadcast_cols(const Tensor& column, std::size_t count) {
  require_rank2("broadcast_cols", column);
  if (column.cols() != 1) {
    throw DimensionError("broadcast_cols: expected [rows x 1], got " + to_string(column.shape()));
  }
  const std::size_t rows = column.rows();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::fill_n(out.begin() + r * count, count, column.data()[r]);
  return make_result(Shape{rows, count}, std::move(out), {column.node()}, [rows, count](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) g[r] += self.grad[r * count + c];
  });
}

Tensor mul_col(const Tensor& x, const Tensor& s) {
  require_rank2("mul_col", x);
  require_rank2("mul_col", s);
  if (s.rows() != x.rows() || s.cols() != 1) {
    throw DimensionError("mul_col: scale shape " + to_string(s.shape()) + " does not fit " +
                         to_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] * s.data()[r];
  return make_result(x.shape(), std::move(out), {x.node(), s.node()}, [rows, cols](Node& self) {
    auto& px = *self.parents[0];
    auto& ps = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c] * ps.value[r];
    }
    if (ps.requires_grad) {
      auto& g = ps.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[r] += self.grad[r * cols + c] * px.value[r * cols + c];
    }
  });
}

Tensor row_dot(const Tensor& x, const Tensor& v) {
  require_rank2("row_dot", x);
  if (v.numel() != x.cols()) {
    throw DimensionError("row_dot: vector shape " + to_string(v.shape()) + " does not fit " +
                         to_string(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += x.data()[r * cols + c] * v.data()[c];
  return make_result(Shape{rows, 1}, std::move(out), {x.node(), v.node()}, [rows, cols](Node& self) {
    auto& px = *self.parents[0];
    auto& pv = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r] * pv.value[c];
    }
    if (pv.requires_grad) {
      auto& g = pv.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r] * px.value[r * cols + c];
    }
  });
}

Tensor custom_op(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                 std::function<void(detail::Node&)> backward) {
  if (num_elements(shape) != value.size()) {
    throw DimensionError("custom_op: shape " + to_string(shape) + " does not match " +
                         std::to_string(value.size()) + " values");
  }
  std::vector<NodePtr> parents;
  parents.reserve(inputs.size());
  for (const auto& t : inputs) parents.push_back(t.node());
  return make_result(std::move(shape), std::move(value), std::move(parents), std::move(backward));
}

}  // namespace ame::diff
