// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "ame/data.hpp"
#include "ame/model.hpp"
#include "ame/tensor.hpp"

// Granger-causal objective: auxiliary errors, per-expert error reductions, the
// normalized target distribution, and its KL distance to the attention.
namespace ame::granger {

/// Sums of clamped error reductions at or below this are treated as "no expert helps".
inline constexpr double kDegenerateSum = 1e-12;

struct AuxErrors {
  diff::Tensor excluded;  // [batch x p]: error of the predictor that lacks expert i
  diff::Tensor all;       // [batch x 1]: error of the predictor that sees every expert
};

/// Per-sample auxiliary loss: mean absolute error for regression, cross-entropy for
/// classification. `y_true` matches the model output layout.
AuxErrors aux_errors(const AmeOutput& output, const diff::Tensor& y_true, Task task);

std::vector<double> delta_epsilon(std::span<const double> eps_excluded, double eps_all);
/// Clamp at zero, then normalize; uniform when nothing remains.
std::vector<double> omega_targets(std::span<const double> delta_eps);
/// D(omega || a) with 0 ln 0 = 0. Throws NumericalError where a_i <= 0 but omega_i > 0.
double kl_divergence(std::span<const double> omega, std::span<const double> a);

// Batched, differentiable versions of the above.
diff::Tensor delta_epsilon(const diff::Tensor& eps_excluded, const diff::Tensor& eps_all);
diff::Tensor omega_targets(const diff::Tensor& delta_eps);
diff::Tensor kl_rows(const diff::Tensor& omega, const diff::Tensor& attention);  // [batch x 1]

/// Mean over samples of D(omega || a). Throws on an empty batch.
diff::Tensor mge_loss(const diff::Tensor& omega, const diff::Tensor& attention);

/// (1 - alpha) main + alpha mge + beta mean(aux).
diff::Tensor total_loss(const diff::Tensor& main, const diff::Tensor& mge,
                        std::span<const diff::Tensor> aux_losses, double alpha, double beta);

struct GrangerTargets {
  Matrix eps_excluded;          // [n x p]
  std::vector<double> eps_all;  // [n]
  Matrix delta_eps;             // [n x p]
  Matrix omega;                 // [n x p]
};

GrangerTargets targets(const AmeOutput& output, const diff::Tensor& y_true, Task task);

/// Every term of the training objective for one batch.
struct Objective {
  diff::Tensor total;
  diff::Tensor main;
  diff::Tensor mge;
  std::vector<diff::Tensor> aux;  // p excluded predictors, then the all-experts predictor
  diff::Tensor omega;             // [batch x p]

  double aux_mean() const;
};

/// Main loss is mean squared error for regression and cross-entropy for classification.
/// `omega_override`, when given, replaces the targets computed from the auxiliary
/// predictors (used to hold targets fixed).
Objective objective(const AmeModel& model, const AmeOutput& output, const diff::Tensor& y_true,
                    const diff::Tensor* omega_override = nullptr);

}  // namespace ame::granger
