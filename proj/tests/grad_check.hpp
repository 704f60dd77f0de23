// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "ame/nn.hpp"
#include "ame/tensor.hpp"

namespace ame::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "name[index]"
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros from
// dividing by nothing.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::fabs(analytic - numeric) /
         std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

// Compares backward() against central differences for every element of every parameter.
inline GradCheck check_gradients(std::span<const diff::Parameter> params,
                                 const std::function<diff::Tensor()>& loss, double step = 1e-5,
                                 double floor = 1e-6) {
  diff::zero_grads(params);
  diff::backward(loss());
  GradCheck out;
  for (const auto& p : params) {
    std::vector<double> analytic(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), analytic.begin());
    diff::Tensor t = p.tensor;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double original = t.data()[i];
      t.mutable_data()[i] = original + step;
      const double up = loss().item();
      t.mutable_data()[i] = original - step;
      const double down = loss().item();
      t.mutable_data()[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric, floor);
      ++out.checked;
      if (err >= out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  diff::zero_grads(params);
  return out;
}

}  // namespace ame::testing
