// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/granger.hpp"

#include <cmath>
#include <string>

#include "ame/nn.hpp"
#include "ame/ops.hpp"

namespace ame::granger {

using diff::Tensor;

AuxErrors aux_errors(const AmeOutput& output, const Tensor& y_true, Task task) {
  auto per_sample = [&](const Tensor& pred) {
    return task == Task::kRegression ? diff::mae_rows(pred, y_true)
                                     : diff::cross_entropy_rows(pred, y_true);
  };
  std::vector<Tensor> excluded;
  excluded.reserve(output.aux_excluded.size());
  for (const auto& pred : output.aux_excluded) excluded.push_back(per_sample(pred));
  return AuxErrors{diff::concat_cols(excluded), per_sample(output.aux_all)};
}

std::vector<double> delta_epsilon(std::span<const double> eps_excluded, double eps_all) {
  std::vector<double> out(eps_excluded.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_excluded[i] - eps_all;
  return out;
}

std::vector<double> omega_targets(std::span<const double> delta_eps) {
  if (delta_eps.empty()) throw diff::DimensionError("omega_targets needs at least one expert");
  std::vector<double> out(delta_eps.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = delta_eps[i] > 0.0 ? delta_eps[i] : 0.0;
    total += out[i];
  }
  if (total <= kDegenerateSum) {
    const double uniform = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v = uniform;
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

double kl_divergence(std::span<const double> omega, std::span<const double> a) {
  if (omega.size() != a.size()) {
    throw diff::DimensionError("kl_divergence: " + std::to_string(omega.size()) + " targets vs " +
                               std::to_string(a.size()) + " attention values");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (omega[i] <= 0.0) continue;
    if (!(a[i] > 0.0)) {
      throw diff::NumericalError("kl_divergence: attention " + std::to_string(i) +
                                 " is zero where the target is positive");
    }
    total += omega[i] * std::log(omega[i] / a[i]);
  }
  return total;
}

Tensor delta_epsilon(const Tensor& eps_excluded, const Tensor& eps_all) {
  return diff::sub(eps_excluded, diff::broadcast_cols(eps_all, eps_excluded.cols()));
}

Tensor omega_targets(const Tensor& delta_eps) {
  if (delta_eps.rank() != 2 || delta_eps.cols() == 0) {
    throw diff::DimensionError("omega_targets: expected [batch x p], got " +
                               diff::to_string(delta_eps.shape()));
  }
  const std::size_t rows = delta_eps.rows(), p = delta_eps.cols();
  std::vector<double> out(rows * p);
  std::vector<double> sums(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = omega_targets(delta_eps.data().subspan(r * p, p));
    std::copy(row.begin(), row.end(), out.begin() + r * p);
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += std::max(0.0, delta_eps.data()[r * p + i]);
    sums[r] = s;
  }
  const Tensor inputs[] = {delta_eps};
  return diff::custom_op(delta_eps.shape(), std::move(out), inputs,
                         [rows, p, sums](diff::detail::Node& self) {
                           auto& parent = *self.parents[0];
                           auto& g = parent.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             if (sums[r] <= kDegenerateSum) continue;  // constant fallback
                             double dot = 0.0;
                             for (std::size_t j = 0; j < p; ++j)
                               dot += self.grad[r * p + j] * self.value[r * p + j];
                             for (std::size_t i = 0; i < p; ++i) {
                               if (parent.value[r * p + i] <= 0.0) continue;
                               g[r * p + i] += (self.grad[r * p + i] - dot) / sums[r];
                             }
                           }
                         });
}

Tensor kl_rows(const Tensor& omega, const Tensor& attention) {
  if (omega.shape() != attention.shape() || omega.rank() != 2) {
    throw diff::DimensionError("kl_rows: shapes " + diff::to_string(omega.shape()) + " and " +
                               diff::to_string(attention.shape()));
  }
  const std::size_t rows = omega.rows(), p = omega.cols();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = kl_divergence(omega.data().subspan(r * p, p), attention.data().subspan(r * p, p));
  }
  const Tensor inputs[] = {omega, attention};
  return diff::custom_op(diff::Shape{rows, 1}, std::move(out), inputs, [rows, p](diff::detail::Node& self) {
    auto& po = *self.parents[0];
    auto& pa = *self.parents[1];
    if (po.requires_grad) {
      auto& g = po.ensure_grad();
      for (std::size_t k = 0; k < rows * p; ++k) {
        if (po.value[k] > 0.0) g[k] += self.grad[k / p] * (std::log(po.value[k] / pa.value[k]) + 1.0);
      }
    }
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t k = 0; k < rows * p; ++k) {
        if (po.value[k] > 0.0) g[k] -= self.grad[k / p] * po.value[k] / pa.value[k];
      }
    }
  });
}

Tensor mge_loss(const Tensor& omega, const Tensor& attention) {
  if (omega.rank() != 2 || omega.rows() == 0) {
    throw diff::DimensionError("mge_loss: empty batch");
  }
  return diff::mean(kl_rows(omega, attention));
}

Tensor total_loss(const Tensor& main, const Tensor& mge, std::span<const Tensor> aux_losses,
                  double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("total_loss: alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("total_loss: beta must be non-negative");
  Tensor total = diff::add(diff::scale(main, 1.0 - alpha), diff::scale(mge, alpha));
  if (!aux_losses.empty() && beta > 0.0) {
    Tensor aux_sum = aux_losses.front();
    for (std::size_t i = 1; i < aux_losses.size(); ++i) aux_sum = diff::add(aux_sum, aux_losses[i]);
    total = diff::add(total, diff::scale(aux_sum, beta / static_cast<double>(aux_losses.size())));
  }
  return total;
}

GrangerTargets targets(const AmeOutput& output, const Tensor& y_true, Task task) {
  const auto errors = aux_errors(output, y_true, task);
  GrangerTargets out;
  out.eps_excluded = Matrix::from_tensor(errors.excluded);
  out.eps_all.assign(errors.all.data().begin(), errors.all.data().end());
  const Tensor delta = delta_epsilon(errors.excluded.detach(), errors.all.detach());
  out.delta_eps = Matrix::from_tensor(delta);
  out.omega = Matrix::from_tensor(omega_targets(delta));
  return out;
}

double Objective::aux_mean() const {
  if (aux.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : aux) s += t.item();
  return s / static_cast<double>(aux.size());
}

Objective objective(const AmeModel& model, const AmeOutput& output, const Tensor& y_true,
                    const Tensor* omega_override) {
  const auto& config = model.config();
  Objective obj;
  obj.main = config.task == Task::kRegression ? diff::loss_mse(output.y, y_true)
                                              : diff::loss_cross_entropy(output.y, y_true);

  const auto errors = aux_errors(output, y_true, config.task);
  const std::size_t p = errors.excluded.cols();
  for (std::size_t i = 0; i < p; ++i) {
    obj.aux.push_back(diff::mean(diff::slice_cols(errors.excluded, i, i + 1)));
  }
  obj.aux.push_back(diff::mean(errors.all));

  if (omega_override != nullptr) {
    obj.omega = *omega_override;
  } else if (config.detach_targets || config.alpha == 0.0) {
    obj.omega = omega_targets(delta_epsilon(errors.excluded.detach(), errors.all.detach()));
  } else {
    obj.omega = omega_targets(delta_epsilon(errors.excluded, errors.all));
  }

  // With alpha = 0 the MGE is only reported, so it stays off the tape.
  obj.mge = config.alpha == 0.0 ? mge_loss(obj.omega.detach(), output.attention.detach())
                                : mge_loss(obj.omega, output.attention);
  obj.total = total_loss(obj.main, obj.mge, obj.aux, config.alpha, config.aux_weight);
  return obj;
}

}  // namespace ame::granger
