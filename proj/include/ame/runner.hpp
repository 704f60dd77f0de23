// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "ame/run_config.hpp"

namespace ame::cli {

struct DataSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

DataSplits load_data(const RunConfig& resolved);

/// Each command writes under run_directory(config) and logs progress to `log`.
/// Failures surface as exceptions; see exit_code_for.
void run_train(const RunConfig& config, std::ostream& log);
void run_explain(const RunConfig& config, std::ostream& log);
void run_benchmark(const RunConfig& config, std::ostream& log);
void run_sweep(const RunConfig& config, std::ostream& log);
void run_oracle(const RunConfig& config, std::ostream& log);

/// Dispatches on the command name; returns the process exit code and reports errors
/// to `err`.
int run_command(const std::string& command, const RunConfig& config, std::ostream& log,
                std::ostream& err);

}  // namespace ame::cli
