// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

// ame-lab: train, explain, benchmark, sweep and oracle runs driven by one JSON config.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ame/runner.hpp"

namespace {

std::string field_listing() {
  std::ostringstream out;
  out << "\nConfig fields (JSON, strict; defaults shown):\n";
  std::size_t width = 0;
  const auto fields = ame::cli::config_field_defaults();
  for (const auto& [name, value] : fields) width = std::max(width, name.size());
  for (const auto& [name, value] : fields) {
    out << "  " << name << std::string(width - name.size() + 2, ' ') << value << "\n";
  }
  out << "\nThe default batch size is 32, scaled down from 256 for desk-sized data.\n"
         "--seed, --out and --jobs override the top-level seed, out_dir and jobs fields.\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attentive mixtures of experts with Granger-causal attribution"};
  app.require_subcommand(1, 1);
  app.footer(field_listing());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> jobs;
  for (const char* name : {"train", "explain", "benchmark", "sweep", "oracle"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the results directory");
    sub->add_option("--jobs", jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  ame::cli::RunConfig config;
  try {
    config = ame::cli::load_run_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (seed) config.seed = *seed;
  if (out_dir) config.out_dir = *out_dir;
  if (jobs) config.jobs = *jobs;
  return ame::cli::run_command(command, config, std::cout, std::cerr);
}
