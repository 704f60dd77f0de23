// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ame/attribution.hpp"
#include "ame/model.hpp"
#include "ame/synthetic.hpp"
#include "ame/training.hpp"

namespace ame::benchmark {

/// A protocol applied to a model or report it cannot handle.
class ProtocolError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// log(q / (1 - q)) with q clamped to [1e-9, 1 - 1e-9].
double log_odds(double q);

/// Indices of the m highest scores, best first; the lower index wins a tie.
std::vector<std::size_t> top_groups(std::span<const double> scores, std::size_t m);

/// Per sample: log-odds of the originally predicted class minus the log-odds after the
/// groups in masked[s] are set to baseline_value. Positive means the prediction weakened.
std::vector<double> mask_and_score(const PredictiveModel& model, const Matrix& samples,
                                   const FeaturePartition& groups,
                                   const std::vector<std::vector<std::size_t>>& masked,
                                   double baseline_value);

struct MaskingSettings {
  double fraction = 0.1;
  double baseline_value = 0.0;
  std::size_t n = 100;
  std::uint64_t seed = 0;  // random-masking control
};

struct MaskingResult {
  std::size_t samples = 0;
  std::size_t masked_groups = 0;  // ceil(fraction * p)
  double informed_drop = 0.0;
  double random_drop = 0.0;
  std::optional<double> paired_t;  // informed minus random
  std::vector<double> informed;
  std::vector<double> random;
};

/// Masks the top groups of each of the first n report rows (aligned with `samples`)
/// and the same number of uniformly drawn groups.
MaskingResult masking_protocol(const PredictiveModel& model,
                               const attribution::ImportanceReport& report, const Matrix& samples,
                               const FeaturePartition& groups, const MaskingSettings& settings);

struct ModelEntry {
  std::string label;
  const AmeModel* model = nullptr;
};

struct MgeQualityRow {
  std::string label;
  double test_mge = 0.0;
  double informed_drop = 0.0;
  double random_drop = 0.0;
  std::string model_hash;
};

struct MgeQualityResult {
  std::vector<MgeQualityRow> rows;
  std::optional<double> spearman;  // test MGE vs informed drop; nullopt when degenerate
};

MgeQualityResult mge_quality_protocol(std::span<const ModelEntry> models, const Dataset& test,
                                      const MaskingSettings& settings);

/// Mean score of each group over the report's samples.
std::vector<double> mean_scores(const attribution::ImportanceReport& report);

/// Members of `truth` (group indices) among the k groups of highest mean score.
std::size_t recall_at_k(const attribution::ImportanceReport& report,
                        std::span<const std::size_t> truth, std::size_t k);

struct TimingRow {
  std::string estimator;
  double seconds = 0.0;
  std::size_t forwards = 0;
  std::size_t backwards = 0;
  double seconds_ratio = 0.0;  // relative to ame
  double forward_ratio = 0.0;
};

/// Runs ame (with `ame_batch`) and then each listed estimator on the same samples.
std::vector<TimingRow> timing_protocol(const AmeModel& model, const Matrix& samples,
                                       const FeaturePartition& groups,
                                       std::span<const std::string> estimators,
                                       std::size_t ame_batch = 1);

/// Estimator by name: ame, saliency or occlusion.
attribution::ImportanceReport run_estimator(const std::string& name, const AmeModel& model,
                                            const Matrix& samples, double baseline_value = 0.0);

// Alpha sweep ---------------------------------------------------------------

/// Fills the partition (singletons when empty), task and class count from the data.
AmeConfig resolve_model_config(AmeConfig config, const synthetic::SyntheticSpec& data);

/// 0, 0.01, ..., 0.1.
std::vector<double> default_alpha_grid();

struct SweepSettings {
  AmeConfig model;
  synthetic::SyntheticSpec data;
  TrainingSettings training;
  std::vector<double> alphas = default_alpha_grid();
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Run r uses seed + r for both the dataset and the model, so every alpha of a run
/// sees the same data.
struct SweepJob {
  double alpha = 0.0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
};

struct SweepRow {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double test_loss = 0.0;   // main loss: MSE or cross-entropy
  double test_error = 0.0;  // MSE or misclassification rate
  double test_mge = 0.0;
  std::size_t epochs = 0;
  std::string model_hash;

  bool operator==(const SweepRow&) const = default;
};

struct SweepAggregate {
  double alpha = 0.0;
  std::size_t runs = 0;
  double loss_mean = 0.0, loss_sd = 0.0;
  double error_mean = 0.0, error_sd = 0.0;
  double mge_mean = 0.0, mge_sd = 0.0;

  bool operator==(const SweepAggregate&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by (alpha, seed)
  std::vector<SweepAggregate> aggregates;

  bool operator==(const SweepResult&) const = default;
};

struct TrainedJob {
  SweepRow row;
  AmeModel model;
  TrainingResult training;
};

std::vector<SweepJob> sweep_jobs(const SweepSettings& settings);
TrainedJob run_sweep_job(const SweepSettings& settings, const SweepJob& job);

/// `lookup` may supply a finished row and skip training; `store` sees each freshly
/// trained job. Both are called from worker threads, one job per call.
struct SweepHooks {
  std::function<std::optional<SweepRow>(const SweepJob&)> lookup;
  std::function<void(const SweepJob&, const TrainedJob&)> store;
};

SweepResult alpha_sweep(const SweepSettings& settings, const SweepHooks& hooks = {});
std::vector<SweepAggregate> aggregate(std::span<const SweepRow> rows);

void write_sweep_csv(std::ostream& out, const SweepResult& result);
SweepResult read_sweep_csv(std::istream& in);

// Consolidated results ------------------------------------------------------

/// One metric value in long format.
struct MetricRow {
  std::string protocol;
  std::string estimator;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string model_hash;

  /// NaN equals NaN here, so undefined statistics round-trip.
  bool operator==(const MetricRow& other) const;
};

struct BenchmarkResult {
  std::vector<MetricRow> rows;
  bool operator==(const BenchmarkResult&) const = default;
};

void append_masking(BenchmarkResult& out, const MaskingResult& result, const std::string& estimator,
                    std::uint64_t seed, const std::string& model_hash);
void append_mge_quality(BenchmarkResult& out, const MgeQualityResult& result, std::uint64_t seed);
void append_recall(BenchmarkResult& out, const std::string& estimator, std::size_t k,
                   std::size_t recall, std::uint64_t seed, const std::string& model_hash);
/// With `wall_clock` false the seconds metrics are written as 0.
void append_timing(BenchmarkResult& out, std::span<const TimingRow> rows, std::uint64_t seed,
                   const std::string& model_hash, bool wall_clock);

void write_benchmark_csv(std::ostream& out, const BenchmarkResult& result);
BenchmarkResult read_benchmark_csv(std::istream& in);

}  // namespace ame::benchmark
