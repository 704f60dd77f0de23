// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ame/data.hpp"
#include "ame/granger.hpp"
#include "ame/model.hpp"
#include "ame/predictive_model.hpp"

// Importance estimators behind one report type: the AME attention read-out,
// input-gradient saliency, and group occlusion, plus a Granger oracle that trains
// independent probes on raw features.
namespace ame::attribution {

struct NormalizedScores {
  std::vector<double> scores;
  bool degenerate = false;  // all-zero input, replaced by uniform
};

/// |e_i| / sum_j |e_j|.
NormalizedScores normalize_scores(std::span<const double> raw);

struct PassCounts {
  std::size_t forwards = 0;
  std::size_t backwards = 0;

  bool operator==(const PassCounts&) const = default;
};

struct ImportanceReport {
  std::string estimator;
  std::string parameters;  // "key=value;key=value"
  std::vector<std::size_t> sample_ids;
  Matrix scores;                   // [n x p], rows on the simplex
  std::vector<std::uint8_t> degenerate;  // per sample
  double seconds = 0.0;
  PassCounts passes;
  std::string model_id;

  std::size_t num_samples() const { return scores.rows(); }
  std::size_t num_groups() const { return scores.cols(); }
};

/// Attention vectors from batched forward passes: ceil(n / batch_size) forwards.
ImportanceReport explain_ame(const AmeModel& model, const Matrix& samples,
                             std::size_t batch_size = 256);

/// Per sample, d(target)/d(input) with target the regression output or the predicted
/// class log-probability; a group's score is the summed |gradient| over its features.
/// One forward and one backward per sample.
ImportanceReport explain_saliency(const PredictiveModel& model, const Matrix& samples,
                                  const FeaturePartition& groups);

/// Per sample, one unmasked forward plus one per group with that group set to
/// `baseline_value`. Degradation is the drop in predicted-class log-probability for
/// classification; for regression it is the rise in absolute error against `targets`
/// when given, otherwise the absolute shift of the prediction. Scores are max(0, .).
ImportanceReport explain_occlusion(const PredictiveModel& model, const Matrix& samples,
                                   const FeaturePartition& groups, double baseline_value = 0.0,
                                   const Matrix* targets = nullptr);

/// CSV columns: sample_id, estimator, group_1..group_p, seconds, forwards, backwards.
/// The last three repeat the report totals on every row of a report. With
/// `wall_clock` false the seconds column is written as 0.
void write_importance_csv(std::ostream& out, std::span<const ImportanceReport> reports,
                          bool wall_clock = true);
/// Inverse of write_importance_csv; rows of one estimator form one report.
std::vector<ImportanceReport> read_importance_csv(std::istream& in);

nlohmann::json to_json(const ImportanceReport& report);

struct ProbeConfig {
  std::vector<std::size_t> hidden{16};
  diff::Activation activation = diff::Activation::kRelu;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
};

/// Trains one probe on all features and one per group on all features except that
/// group, then evaluates per-sample errors, error reductions, and normalized targets
/// on `heldout`. Requires at least 10 training samples per group.
granger::GrangerTargets granger_oracle(const Dataset& train, const Dataset& heldout,
                                       const FeaturePartition& groups, const ProbeConfig& probe);

}  // namespace ame::attribution
