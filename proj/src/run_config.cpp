// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ame::cli {

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out, std::string_view section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("field '" + std::string(section) + "." + key + "': " + e.what());
  }
}

Json to_json(const TrainingSettings& t) {
  return {{"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"restore_best", t.restore_best}};
}

TrainingSettings training_from_json(const Json& j) {
  require_known_keys(j, {"batch_size", "max_epochs", "patience", "restore_best"}, "training");
  TrainingSettings t;
  read(j, "batch_size", t.batch_size, "training");
  read(j, "max_epochs", t.max_epochs, "training");
  read(j, "patience", t.patience, "training");
  read(j, "restore_best", t.restore_best, "training");
  if (t.batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
  if (t.max_epochs == 0) throw ConfigError("training.max_epochs must be >= 1");
  if (t.patience == 0) throw ConfigError("training.patience must be >= 1");
  return t;
}

Json to_json(const DataSource& d) {
  if (d.kind == DataKind::kSynthetic) {
    Json j = synthetic::to_json(d.synthetic);
    j["source"] = "synthetic";
    return j;
  }
  return {{"source", "csv"},           {"train", d.train_path}, {"validation", d.validation_path},
          {"test", d.test_path},       {"target", d.target},    {"task", to_string(d.task)}};
}

DataSource data_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("data must be a JSON object");
  DataSource d;
  std::string source = "synthetic";
  read(j, "source", source, "data");
  if (source == "synthetic") {
    Json rest = j;
    rest.erase("source");
    d.synthetic = synthetic::spec_from_json(rest);
    return d;
  }
  if (source != "csv") throw ConfigError("field 'data.source': expected synthetic or csv");
  d.kind = DataKind::kCsv;
  require_known_keys(j, {"source", "train", "validation", "test", "target", "task"}, "data");
  read(j, "train", d.train_path, "data");
  read(j, "validation", d.validation_path, "data");
  read(j, "test", d.test_path, "data");
  read(j, "target", d.target, "data");
  std::string task(to_string(d.task));
  read(j, "task", task, "data");
  try {
    d.task = parse_task(task);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'data.task': ") + e.what());
  }
  if (d.train_path.empty() || d.validation_path.empty() || d.test_path.empty()) {
    throw ConfigError("csv data needs data.train, data.validation and data.test");
  }
  return d;
}

const std::set<std::string> kEstimators{"ame", "saliency", "occlusion"};
const std::set<std::string> kProtocols{"masking", "recall", "timing", "mge_quality"};

void check_names(const std::vector<std::string>& names, const std::set<std::string>& known,
                 const std::string& field) {
  for (const auto& n : names) {
    if (!known.contains(n)) throw ConfigError("field '" + field + "': unknown entry '" + n + "'");
  }
}

Json to_json(const ExplainConfig& e) {
  return {{"estimators", e.estimators},
          {"baseline_value", e.baseline_value},
          {"samples", e.samples},
          {"batch_size", e.batch_size}};
}

ExplainConfig explain_from_json(const Json& j) {
  require_known_keys(j, {"estimators", "baseline_value", "samples", "batch_size"}, "explain");
  ExplainConfig e;
  read(j, "estimators", e.estimators, "explain");
  read(j, "baseline_value", e.baseline_value, "explain");
  read(j, "samples", e.samples, "explain");
  read(j, "batch_size", e.batch_size, "explain");
  check_names(e.estimators, kEstimators, "explain.estimators");
  if (e.estimators.empty()) throw ConfigError("explain.estimators must not be empty");
  if (e.batch_size == 0) throw ConfigError("explain.batch_size must be >= 1");
  return e;
}

Json to_json(const BenchmarkConfig& b) {
  return {{"protocols", b.protocols},
          {"estimators", b.estimators},
          {"fraction", b.fraction},
          {"baseline_value", b.baseline_value},
          {"n", b.n},
          {"k", b.k},
          {"timing_samples", b.timing_samples},
          {"timing_batch", b.timing_batch},
          {"mge_alphas", b.mge_alphas},
          {"mge_max_epochs", b.mge_max_epochs}};
}

BenchmarkConfig benchmark_from_json(const Json& j) {
  require_known_keys(j,
                     {"protocols", "estimators", "fraction", "baseline_value", "n", "k",
                      "timing_samples", "timing_batch", "mge_alphas", "mge_max_epochs"},
                     "benchmark");
  BenchmarkConfig b;
  read(j, "protocols", b.protocols, "benchmark");
  read(j, "estimators", b.estimators, "benchmark");
  read(j, "fraction", b.fraction, "benchmark");
  read(j, "baseline_value", b.baseline_value, "benchmark");
  read(j, "n", b.n, "benchmark");
  read(j, "k", b.k, "benchmark");
  read(j, "timing_samples", b.timing_samples, "benchmark");
  read(j, "timing_batch", b.timing_batch, "benchmark");
  read(j, "mge_alphas", b.mge_alphas, "benchmark");
  read(j, "mge_max_epochs", b.mge_max_epochs, "benchmark");
  check_names(b.protocols, kProtocols, "benchmark.protocols");
  check_names(b.estimators, kEstimators, "benchmark.estimators");
  if (!(b.fraction > 0.0 && b.fraction < 1.0)) throw ConfigError("benchmark.fraction must lie in (0, 1)");
  if (b.n == 0) throw ConfigError("benchmark.n must be >= 1");
  if (b.timing_batch == 0) throw ConfigError("benchmark.timing_batch must be >= 1");
  if (b.mge_alphas.size() != b.mge_max_epochs.size()) {
    throw ConfigError("benchmark.mge_alphas and benchmark.mge_max_epochs differ in length");
  }
  return b;
}

Json to_json(const SweepConfig& s) { return {{"alphas", s.alphas}, {"runs", s.runs}}; }

SweepConfig sweep_from_json(const Json& j) {
  require_known_keys(j, {"alphas", "runs"}, "sweep");
  SweepConfig s;
  read(j, "alphas", s.alphas, "sweep");
  read(j, "runs", s.runs, "sweep");
  if (s.alphas.empty()) throw ConfigError("sweep.alphas must not be empty");
  if (s.runs == 0) throw ConfigError("sweep.runs must be >= 1");
  for (double a : s.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep.alphas entries must lie in [0, 1]");
  }
  return s;
}

Json to_json(const attribution::ProbeConfig& p) {
  return {{"hidden", p.hidden},
          {"activation", diff::to_string(p.activation)},
          {"epochs", p.epochs},
          {"batch_size", p.batch_size},
          {"learning_rate", p.learning_rate}};
}

attribution::ProbeConfig oracle_from_json(const Json& j) {
  require_known_keys(j, {"hidden", "activation", "epochs", "batch_size", "learning_rate"}, "oracle");
  attribution::ProbeConfig p;
  read(j, "hidden", p.hidden, "oracle");
  std::string activation(diff::to_string(p.activation));
  read(j, "activation", activation, "oracle");
  try {
    p.activation = diff::parse_activation(activation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'oracle.activation': ") + e.what());
  }
  read(j, "epochs", p.epochs, "oracle");
  read(j, "batch_size", p.batch_size, "oracle");
  read(j, "learning_rate", p.learning_rate, "oracle");
  if (p.batch_size == 0) throw ConfigError("oracle.batch_size must be >= 1");
  if (!(p.learning_rate > 0.0)) throw ConfigError("oracle.learning_rate must be positive");
  return p;
}

void flatten(const Json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [key, value] : j.items()) {
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
    return;
  }
  out.emplace_back(prefix, j.dump());
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  require_known_keys(j,
                     {"command", "seed", "out_dir", "record_wall_clock", "jobs", "model", "data",
                      "training", "explain", "benchmark", "sweep", "oracle"},
                     "run config");
  RunConfig c;
  if (j.contains("command")) {
    std::string command;
    read(j, "command", command, "run");
    c.command = command;
  }
  read(j, "seed", c.seed, "run");
  read(j, "out_dir", c.out_dir, "run");
  read(j, "record_wall_clock", c.record_wall_clock, "run");
  read(j, "jobs", c.jobs, "run");
  if (c.jobs == 0) throw ConfigError("jobs must be >= 1");
  if (j.contains("model")) c.model = ame_config_from_json(j.at("model"));
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("training")) c.training = training_from_json(j.at("training"));
  if (j.contains("explain")) c.explain = explain_from_json(j.at("explain"));
  if (j.contains("benchmark")) c.benchmark = benchmark_from_json(j.at("benchmark"));
  if (j.contains("sweep")) c.sweep = sweep_from_json(j.at("sweep"));
  if (j.contains("oracle")) c.oracle = oracle_from_json(j.at("oracle"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/false);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

Json to_json(const RunConfig& c) {
  Json j{{"seed", c.seed},
         {"out_dir", c.out_dir},
         {"record_wall_clock", c.record_wall_clock},
         {"jobs", c.jobs},
         {"model", to_json(c.model)},
         {"data", to_json(c.data)},
         {"training", to_json(c.training)},
         {"explain", to_json(c.explain)},
         {"benchmark", to_json(c.benchmark)},
         {"sweep", to_json(c.sweep)},
         {"oracle", to_json(c.oracle)}};
  if (c.command) j["command"] = *c.command;
  return j;
}

RunConfig resolve(RunConfig c) {
  c.model.seed = c.seed;
  c.oracle.seed = c.seed;
  if (c.data.kind == DataKind::kSynthetic) {
    c.data.synthetic.seed = c.seed;
    c.model = benchmark::resolve_model_config(std::move(c.model), c.data.synthetic);
  } else {
    c.model.task = c.data.task;
  }
  return c;
}

std::string run_id(const RunConfig& resolved) {
  const Json identity{{"seed", resolved.seed},
                      {"model", to_json(resolved.model)},
                      {"data", to_json(resolved.data)},
                      {"training", to_json(resolved.training)}};
  return fnv1a_hex(identity.dump());
}

std::filesystem::path run_directory(const RunConfig& resolved) {
  return std::filesystem::path(resolved.out_dir) / run_id(resolved);
}

std::vector<std::pair<std::string, std::string>> config_field_defaults() {
  std::vector<std::pair<std::string, std::string>> out;
  Json defaults = to_json(RunConfig{});
  defaults["command"] = "train|explain|benchmark|sweep|oracle (optional)";
  flatten(defaults, "", out);
  // CSV data sources take these instead of the synthetic fields.
  DataSource csv_source;
  csv_source.kind = DataKind::kCsv;
  for (const auto& key : {"train", "validation", "test", "target", "task"}) {
    out.emplace_back(std::string("data.") + key + " (source=csv)", to_json(csv_source).at(key).dump());
  }
  return out;
}

}  // namespace ame::cli
