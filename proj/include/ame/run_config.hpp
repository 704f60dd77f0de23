// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ame/attribution.hpp"
#include "ame/benchmark.hpp"
#include "ame/model.hpp"
#include "ame/model_io.hpp"
#include "ame/synthetic.hpp"
#include "ame/training.hpp"

namespace ame::cli {

enum class DataKind { kSynthetic, kCsv };

/// Either a generated dataset or three CSV files with numeric columns. For CSV data
/// every column except `target` is a feature; classification targets hold integer
/// class labels.
struct DataSource {
  DataKind kind = DataKind::kSynthetic;
  synthetic::SyntheticSpec synthetic;
  std::string train_path;
  std::string validation_path;
  std::string test_path;
  std::string target = "y";
  Task task = Task::kRegression;
};

struct ExplainConfig {
  std::vector<std::string> estimators{"ame"};
  double baseline_value = 0.0;
  std::size_t samples = 0;  // leading test rows; 0 means all
  std::size_t batch_size = 256;
};

struct BenchmarkConfig {
  std::vector<std::string> protocols{"masking", "recall", "timing"};
  std::vector<std::string> estimators{"ame", "saliency", "occlusion"};
  double fraction = 0.1;
  double baseline_value = 0.0;
  std::size_t n = 100;
  std::size_t k = 0;  // 0: number of informative groups
  std::size_t timing_samples = 256;
  std::size_t timing_batch = 1;
  // mge_quality trains one model per entry; max_epochs 0 keeps training.max_epochs.
  std::vector<double> mge_alphas{0.1, 0.01, 0.0};
  std::vector<std::size_t> mge_max_epochs{0, 3, 0};
};

struct SweepConfig {
  std::vector<double> alphas = benchmark::default_alpha_grid();
  std::size_t runs = 5;
};

struct RunConfig {
  std::optional<std::string> command;
  std::uint64_t seed = 0;
  std::string out_dir = "runs";
  bool record_wall_clock = true;
  std::size_t jobs = 1;
  AmeConfig model;
  DataSource data;
  TrainingSettings training;
  ExplainConfig explain;
  BenchmarkConfig benchmark;
  SweepConfig sweep;
  attribution::ProbeConfig oracle;
};

/// Strict: unknown fields anywhere raise ConfigError naming the field.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);

/// Applies the run seed to the model, data and probes, and fills the partition and
/// task from the data source.
RunConfig resolve(RunConfig config);

/// Hash of the settings that determine the trained model (seed, model, data,
/// training); explain, benchmark and sweep outputs share that run's directory.
std::string run_id(const RunConfig& resolved);
std::filesystem::path run_directory(const RunConfig& resolved);

/// Every config field as ("section.field", default rendered as JSON).
std::vector<std::pair<std::string, std::string>> config_field_defaults();

}  // namespace ame::cli
