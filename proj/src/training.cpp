// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "ame/csv.hpp"
#include "ame/granger.hpp"

namespace ame {

namespace {

void check_compatible(const AmeModel& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("dataset is empty");
  if (data.x.cols() != model.input_dim()) {
    throw diff::DimensionError("dataset has " + std::to_string(data.x.cols()) +
                               " features, model expects " + std::to_string(model.input_dim()));
  }
  if (data.task != model.task() || data.y.cols() != model.config().output_dim()) {
    throw std::invalid_argument("dataset targets do not match the model task");
  }
}

void accumulate(EpochMetrics& into, const granger::Objective& obj, std::size_t n) {
  const double w = static_cast<double>(n);
  into.main_loss += w * obj.main.item();
  into.mge += w * obj.mge.item();
  into.aux_loss_mean += w * obj.aux_mean();
  into.total += w * obj.total.item();
  into.samples += n;
}

void finish(EpochMetrics& m) {
  const double n = static_cast<double>(m.samples);
  m.main_loss /= n;
  m.mge /= n;
  m.aux_loss_mean /= n;
  m.total /= n;
}

}  // namespace

EpochMetrics train_epoch(AmeModel& model, const Dataset& data, diff::Optimizer& optimizer,
                         std::size_t batch_size, diff::Rng& shuffle_rng) {
  check_compatible(model, data);
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

  const auto params = model.parameters();
  EpochMetrics metrics;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const auto x = data.x.select_rows(idx).to_tensor();
    const auto y = data.y.select_rows(idx).to_tensor();
    const auto output = model.forward(x);
    const auto obj = granger::objective(model, output, y);
    if (!std::isfinite(obj.total.item())) {
      throw TrainingDiverged("training loss became non-finite");
    }
    diff::backward(obj.total);
    optimizer.step(params);
    diff::zero_grads(params);
    accumulate(metrics, obj, idx.size());
  }
  finish(metrics);
  return metrics;
}

EpochMetrics evaluate(const AmeModel& model, const Dataset& data, std::size_t batch_size) {
  check_compatible(model, data);
  const diff::NoGradGuard no_grad;
  EpochMetrics metrics;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    const auto x = data.x.slice_rows(start, end).to_tensor();
    const auto y = data.y.slice_rows(start, end).to_tensor();
    const auto output = model.forward(x);
    accumulate(metrics, granger::objective(model, output, y), end - start);
  }
  finish(metrics);
  return metrics;
}

TrainingResult fit(AmeModel& model, const Dataset& train, const Dataset& validation,
                   const TrainingSettings& settings) {
  diff::Optimizer optimizer(model.config().optimizer);
  diff::Rng shuffle_rng = diff::Rng(model.config().seed).fork(0x5eed);
  const double alpha = model.config().alpha;

  TrainingResult result;
  result.best_validation = std::numeric_limits<double>::infinity();
  auto best_values = model.values();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= settings.max_epochs; ++epoch) {
    const auto train_metrics = train_epoch(model, train, optimizer, settings.batch_size, shuffle_rng);
    const auto val_metrics = evaluate(model, validation);
    if (!std::isfinite(val_metrics.total)) throw TrainingDiverged("validation loss became non-finite");
    result.log.push_back({epoch, "train", train_metrics, alpha});
    result.log.push_back({epoch, "val", val_metrics, alpha});
    result.epochs_run = epoch;

    const double score = val_metrics.blended(alpha);
    if (score < result.best_validation) {
      result.best_validation = score;
      result.best_epoch = epoch;
      since_best = 0;
      if (settings.restore_best) best_values = model.values();
    } else if (++since_best >= settings.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (settings.restore_best && result.best_epoch > 0) model.set_values(best_values);
  return result;
}

void write_training_log(std::ostream& out, std::span<const TrainingLogRow> rows) {
  out << "epoch,split,main_loss,mge,aux_loss_mean,alpha\n";
  for (const auto& row : rows) {
    out << row.epoch << ',' << row.split << ',' << csv::format_double(row.metrics.main_loss) << ','
        << csv::format_double(row.metrics.mge) << ',' << csv::format_double(row.metrics.aux_loss_mean)
        << ',' << csv::format_double(row.alpha) << '\n';
  }
}

}  // namespace ame
