// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ame/data.hpp"
#include "ame/model.hpp"
#include "ame/nn.hpp"

namespace ame {

/// Thrown when a loss turns non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  double main_loss = 0.0;
  double mge = 0.0;
  double aux_loss_mean = 0.0;
  double total = 0.0;
  std::size_t samples = 0;

  /// (1 - alpha) * main + alpha * mge, without the auxiliary term; used for early stopping.
  double blended(double alpha) const { return (1.0 - alpha) * main_loss + alpha * mge; }
};

/// One shuffled pass of minibatch updates on the total loss. Metrics are
/// sample-weighted averages over the pass.
EpochMetrics train_epoch(AmeModel& model, const Dataset& data, diff::Optimizer& optimizer,
                         std::size_t batch_size, diff::Rng& shuffle_rng);

/// Same metrics without updating anything.
EpochMetrics evaluate(const AmeModel& model, const Dataset& data, std::size_t batch_size = 256);

struct TrainingSettings {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 12;
  bool restore_best = true;
};

struct TrainingLogRow {
  std::size_t epoch = 0;
  std::string split;
  EpochMetrics metrics;
  double alpha = 0.0;
};

struct TrainingResult {
  std::vector<TrainingLogRow> log;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_validation = 0.0;
  bool early_stopped = false;
};

/// Trains with early stopping on the validation blend and, if requested, restores the
/// best parameters. Log rows hold train and val metrics for every epoch.
TrainingResult fit(AmeModel& model, const Dataset& train, const Dataset& validation,
                   const TrainingSettings& settings);

/// CSV with header epoch,split,main_loss,mge,aux_loss_mean,alpha.
void write_training_log(std::ostream& out, std::span<const TrainingLogRow> rows);

}  // namespace ame
