// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ame/csv.hpp"
#include "ame/stats.hpp"

namespace ame::cli {

namespace fs = std::filesystem;

namespace {

// Write-then-rename so an interrupted run never leaves a truncated artifact.
void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

Dataset read_csv_split(const std::string& path, const DataSource& source, std::size_t num_classes) {
  const auto table = csv::read_file(path);
  const std::size_t target = table.column(source.target);
  Dataset out;
  out.task = source.task;
  const std::size_t d = table.header.size() - 1;
  out.x = Matrix(0, d);
  out.y = Matrix(0, source.task == Task::kRegression ? 1 : num_classes);
  std::vector<double> xs(d), ys(out.y.cols());
  for (const auto& row : table.rows) {
    for (std::size_t c = 0, k = 0; c < row.size(); ++c) {
      if (c != target) xs[k++] = csv::parse_double(row[c]);
    }
    const double t = csv::parse_double(row[target]);
    if (source.task == Task::kRegression) {
      ys[0] = t;
    } else {
      if (t < 0 || t != std::floor(t) || t >= static_cast<double>(num_classes)) {
        throw ConfigError(path + ": class label " + row[target] + " is not in [0, model.num_classes)");
      }
      std::fill(ys.begin(), ys.end(), 0.0);
      ys[static_cast<std::size_t>(t)] = 1.0;
    }
    out.x.append_row(xs);
    out.y.append_row(ys);
  }
  return out;
}

/// The model config with the partition filled in for the loaded feature count.
AmeConfig model_config(const RunConfig& config, const DataSplits& data) {
  AmeConfig m = config.model;
  if (m.feature_partition.empty()) m.feature_partition = singleton_partition(data.train.x.cols());
  validate(m);
  if (validate_partition(m.feature_partition) != data.train.x.cols()) {
    throw ConfigError("model.feature_partition covers " +
                      std::to_string(validate_partition(m.feature_partition)) +
                      " features but the data has " + std::to_string(data.train.x.cols()));
  }
  return m;
}

/// Groups holding at least one informative feature.
std::vector<std::size_t> informative_groups(const RunConfig& config, const FeaturePartition& groups) {
  if (config.data.kind != DataKind::kSynthetic) {
    throw ConfigError("the recall protocol needs synthetic data with a known informative set");
  }
  const auto& s = config.data.synthetic.informative;
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto f : groups[g]) {
      if (std::find(s.begin(), s.end(), f) != s.end()) {
        out.push_back(g);
        break;
      }
    }
  }
  return out;
}

std::string importance_csv(std::span<const attribution::ImportanceReport> reports, bool wall_clock) {
  std::ostringstream out;
  attribution::write_importance_csv(out, reports, wall_clock);
  return out.str();
}

void check_simplex(const attribution::ImportanceReport& report) {
  for (std::size_t s = 0; s < report.num_samples(); ++s) {
    double total = 0.0;
    for (double v : report.scores.row(s)) {
      if (!(v >= 0.0)) throw std::runtime_error(report.estimator + ": negative importance score");
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-6) {
      throw std::runtime_error(report.estimator + ": importance row " + std::to_string(s) +
                               " sums to " + csv::format_double(total));
    }
  }
}

struct Trained {
  AmeModel model;
  TrainingResult training;
};

Trained train_model(const AmeConfig& config, const DataSplits& data, const TrainingSettings& settings) {
  AmeModel model = build_ame(config);
  auto training = fit(model, data.train, data.validation, settings);
  return {std::move(model), std::move(training)};
}

double error_rate(const AmeModel& model, const Dataset& data) {
  const diff::NoGradGuard no_grad;
  const Matrix pred = Matrix::from_tensor(model.predict(data.x.to_tensor()));
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (argmax(pred.row(r)) != argmax(data.y.row(r))) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

void write_config(const RunConfig& resolved, const fs::path& dir) {
  RunConfig copy = resolved;
  copy.command.reset();
  write_file(dir / "config.json", to_json(copy).dump(2) + "\n");
}

AmeModel load_trained(const RunConfig& resolved, const DataSplits& data, const fs::path& dir) {
  const fs::path path = dir / "model.json";
  if (!fs::exists(path)) {
    throw std::runtime_error("no trained model at " + path.string() + "; run `ame-lab train` first");
  }
  AmeModel model = load_model(path);
  const auto expected = model_config(resolved, data);
  if (model.config().feature_partition != expected.feature_partition) {
    throw ConfigError("model.json was trained with a different feature partition than the config");
  }
  if (model.input_dim() != data.test.x.cols() || model.task() != data.test.task) {
    throw ConfigError("model.json does not match the configured data");
  }
  return model;
}

std::string sweep_job_id(const std::string& run, const benchmark::SweepJob& job) {
  return fnv1a_hex(run + "/" + csv::format_double(job.alpha) + "/" + std::to_string(job.seed));
}

Json to_json(const benchmark::SweepRow& r) {
  return {{"alpha", r.alpha},         {"seed", r.seed},         {"test_loss", r.test_loss},
          {"test_error", r.test_error}, {"test_mge", r.test_mge}, {"epochs", r.epochs},
          {"model_hash", r.model_hash}};
}

benchmark::SweepRow sweep_row_from_json(const Json& j) {
  return {j.at("alpha").get<double>(),       j.at("seed").get<std::uint64_t>(),
          j.at("test_loss").get<double>(),   j.at("test_error").get<double>(),
          j.at("test_mge").get<double>(),    j.at("epochs").get<std::size_t>(),
          j.at("model_hash").get<std::string>()};
}

}  // namespace

DataSplits load_data(const RunConfig& c) {
  if (c.data.kind == DataKind::kSynthetic) {
    auto s = synthetic::generate(c.data.synthetic);
    return {std::move(s.train), std::move(s.validation), std::move(s.test)};
  }
  const std::size_t k = c.model.num_classes;
  DataSplits d{read_csv_split(c.data.train_path, c.data, k),
               read_csv_split(c.data.validation_path, c.data, k),
               read_csv_split(c.data.test_path, c.data, k)};
  if (d.validation.x.cols() != d.train.x.cols() || d.test.x.cols() != d.train.x.cols()) {
    throw ConfigError("csv splits have different numbers of feature columns");
  }
  return d;
}

void run_train(const RunConfig& config, std::ostream& log) {
  const RunConfig resolved = resolve(config);
  const fs::path dir = run_directory(resolved);
  const auto data = load_data(resolved);
  auto [model, training] = train_model(model_config(resolved, data), data, resolved.training);

  write_config(resolved, dir);
  save_model(model, dir / "model.json");
  std::ostringstream training_log;
  write_training_log(training_log, training.log);
  write_file(dir / "training_log.csv", training_log.str());

  const auto test = evaluate(model, data.test);
  log << "run " << run_id(resolved) << ": " << training.epochs_run << " epochs, best epoch "
      << training.best_epoch << (training.early_stopped ? " (early stop)" : "") << "\n";
  log << "test main_loss=" << csv::format_double(test.main_loss)
      << " mge=" << csv::format_double(test.mge)
      << " aux_loss_mean=" << csv::format_double(test.aux_loss_mean);
  if (model.task() == Task::kClassification) {
    log << " error_rate=" << csv::format_double(error_rate(model, data.test));
  }
  log << "\nwrote " << dir.string() << "\n";
}

void run_explain(const RunConfig& config, std::ostream& log) {
  const RunConfig resolved = resolve(config);
  const fs::path dir = run_directory(resolved);
  const auto data = load_data(resolved);
  const AmeModel model = load_trained(resolved, data, dir);
  const std::size_t n = resolved.explain.samples == 0
                            ? data.test.size()
                            : std::min(resolved.explain.samples, data.test.size());
  const Matrix samples = data.test.x.slice_rows(0, n);

  std::vector<attribution::ImportanceReport> reports;
  for (const auto& name : resolved.explain.estimators) {
    auto report = name == "ame" ? attribution::explain_ame(model, samples, resolved.explain.batch_size)
                                : benchmark::run_estimator(name, model, samples,
                                                           resolved.explain.baseline_value);
    check_simplex(report);
    log << name << ": " << report.num_samples() << " samples, " << report.passes.forwards
        << " forwards, " << report.passes.backwards << " backwards\n";
    reports.push_back(std::move(report));
  }
  write_config(resolved, dir);
  write_file(dir / "importance.csv", importance_csv(reports, resolved.record_wall_clock));
  log << "wrote " << (dir / "importance.csv").string() << "\n";
}

void run_benchmark(const RunConfig& config, std::ostream& log) {
  const RunConfig resolved = resolve(config);
  const fs::path dir = run_directory(resolved);
  const auto data = load_data(resolved);
  if (!fs::exists(dir / "model.json")) {
    log << "no trained model yet, training first\n";
    run_train(config, log);
  }
  const AmeModel model = load_trained(resolved, data, dir);
  const auto& groups = model.config().feature_partition;
  const auto& bench = resolved.benchmark;
  const std::string hash = model_hash(model);
  const auto has = [&](const std::string& protocol) {
    return std::find(bench.protocols.begin(), bench.protocols.end(), protocol) !=
           bench.protocols.end();
  };
  const bool needs_reports = has("masking") || has("recall");
  if (has("masking") || has("mge_quality")) {
    if (model.task() != Task::kClassification) {
      throw benchmark::ProtocolError("the masking protocols need a classification task");
    }
  }

  benchmark::MaskingSettings masking;
  masking.fraction = bench.fraction;
  masking.baseline_value = bench.baseline_value;
  masking.n = bench.n;
  masking.seed = resolved.seed;

  benchmark::BenchmarkResult result;
  if (needs_reports) {
    std::vector<std::size_t> truth;
    std::size_t k = 0;
    if (has("recall")) {
      truth = informative_groups(resolved, groups);
      k = bench.k == 0 ? truth.size() : bench.k;
      if (k > groups.size()) throw ConfigError("benchmark.k exceeds the number of groups");
    }
    for (const auto& name : bench.estimators) {
      const auto report = benchmark::run_estimator(name, model, data.test.x, bench.baseline_value);
      if (has("masking")) {
        const auto m = benchmark::masking_protocol(model, report, data.test.x, groups, masking);
        benchmark::append_masking(result, m, name, resolved.seed, hash);
        log << "masking " << name << ": drop " << csv::format_double(m.informed_drop)
            << " vs random " << csv::format_double(m.random_drop) << " over " << m.samples
            << " samples (masking " << m.masked_groups << " of " << groups.size() << " groups)\n";
      }
      if (has("recall")) {
        const auto recall = benchmark::recall_at_k(report, truth, k);
        benchmark::append_recall(result, name, k, recall, resolved.seed, hash);
        log << "recall@" << k << " " << name << ": " << recall << "\n";
      }
    }
  }
  if (has("timing")) {
    const std::size_t n = std::min(bench.timing_samples, data.test.size());
    const auto rows = benchmark::timing_protocol(model, data.test.x.slice_rows(0, n), groups,
                                                 bench.estimators, bench.timing_batch);
    benchmark::append_timing(result, rows, resolved.seed, hash, resolved.record_wall_clock);
    for (const auto& r : rows) {
      log << "timing " << r.estimator << ": " << r.forwards << " forwards, " << r.backwards
          << " backwards, x" << csv::format_double(r.forward_ratio) << " forwards vs ame\n";
    }
  }
  if (has("mge_quality")) {
    std::vector<AmeModel> models;
    std::vector<benchmark::ModelEntry> entries;
    for (std::size_t i = 0; i < bench.mge_alphas.size(); ++i) {
      AmeConfig c = model_config(resolved, data);
      c.alpha = bench.mge_alphas[i];
      TrainingSettings t = resolved.training;
      if (bench.mge_max_epochs[i] > 0) t.max_epochs = bench.mge_max_epochs[i];
      models.push_back(train_model(c, data, t).model);
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
      entries.push_back({"alpha=" + csv::format_double(bench.mge_alphas[i]) + ";max_epochs=" +
                             std::to_string(bench.mge_max_epochs[i]),
                         &models[i]});
    }
    const auto q = benchmark::mge_quality_protocol(entries, data.test, masking);
    benchmark::append_mge_quality(result, q, resolved.seed);
    for (const auto& row : q.rows) {
      log << "mge_quality " << row.label << ": test mge " << csv::format_double(row.test_mge)
          << ", drop " << csv::format_double(row.informed_drop) << "\n";
    }
    log << "mge_quality spearman: "
        << (q.spearman ? csv::format_double(*q.spearman) : std::string("undefined (degenerate)"))
        << "\n";
  }
  std::ostringstream out;
  benchmark::write_benchmark_csv(out, result);
  write_config(resolved, dir);
  write_file(dir / "benchmark.csv", out.str());
  log << "wrote " << (dir / "benchmark.csv").string() << "\n";
}

void run_sweep(const RunConfig& config, std::ostream& log) {
  const RunConfig resolved = resolve(config);
  if (resolved.data.kind != DataKind::kSynthetic) {
    throw ConfigError("sweep regenerates data per seed and needs a synthetic data source");
  }
  const fs::path dir = run_directory(resolved);
  const std::string run = run_id(resolved);
  benchmark::SweepSettings settings;
  settings.model = resolved.model;
  settings.data = resolved.data.synthetic;
  settings.training = resolved.training;
  settings.alphas = resolved.sweep.alphas;
  settings.runs = resolved.sweep.runs;
  settings.seed = resolved.seed;
  settings.jobs = resolved.jobs;

  std::atomic<std::size_t> reused{0}, trained{0};
  benchmark::SweepHooks hooks;
  hooks.lookup = [&](const benchmark::SweepJob& job) -> std::optional<benchmark::SweepRow> {
    const fs::path path = dir / "jobs" / sweep_job_id(run, job) / "row.json";
    if (!fs::exists(path)) return std::nullopt;
    std::ifstream in(path);
    try {
      auto row = sweep_row_from_json(Json::parse(in));
      ++reused;
      return row;
    } catch (const Json::exception&) {
      return std::nullopt;  // unreadable leftovers are retrained
    }
  };
  hooks.store = [&](const benchmark::SweepJob& job, const benchmark::TrainedJob& done) {
    const fs::path job_dir = dir / "jobs" / sweep_job_id(run, job);
    std::ostringstream training_log;
    write_training_log(training_log, done.training.log);
    write_file(job_dir / "training_log.csv", training_log.str());
    write_file(job_dir / "row.json", to_json(done.row).dump() + "\n");
    ++trained;
  };
  const auto result = benchmark::alpha_sweep(settings, hooks);
  std::ostringstream out;
  benchmark::write_sweep_csv(out, result);
  write_config(resolved, dir);
  write_file(dir / "sweep.csv", out.str());

  log << "sweep: " << result.rows.size() << " runs (" << trained.load() << " trained, "
      << reused.load() << " reused)\n";
  for (const auto& a : result.aggregates) {
    log << "alpha " << csv::format_double(a.alpha) << ": loss " << csv::format_double(a.loss_mean)
        << " +- " << csv::format_double(a.loss_sd) << ", mge " << csv::format_double(a.mge_mean)
        << " +- " << csv::format_double(a.mge_sd) << "\n";
  }
  log << "wrote " << (dir / "sweep.csv").string() << "\n";
}

void run_oracle(const RunConfig& config, std::ostream& log) {
  const RunConfig resolved = resolve(config);
  const fs::path dir = run_directory(resolved);
  const auto data = load_data(resolved);
  const auto groups = model_config(resolved, data).feature_partition;
  const auto targets = attribution::granger_oracle(data.train, data.test, groups, resolved.oracle);
  const std::size_t p = groups.size();

  std::ostringstream out;
  out << "sample_id,eps_all";
  for (const char* prefix : {"eps_excluded_", "delta_", "omega_"}) {
    for (std::size_t g = 1; g <= p; ++g) out << ',' << prefix << g;
  }
  out << '\n';
  for (std::size_t s = 0; s < targets.omega.rows(); ++s) {
    out << s << ',' << csv::format_double(targets.eps_all[s]);
    for (const Matrix* m : {&targets.eps_excluded, &targets.delta_eps, &targets.omega}) {
      for (double v : m->row(s)) out << ',' << csv::format_double(v);
    }
    out << '\n';
  }
  write_config(resolved, dir);
  write_file(dir / "oracle.csv", out.str());

  log << "oracle mean omega:";
  for (std::size_t g = 0; g < p; ++g) {
    double total = 0.0;
    for (std::size_t s = 0; s < targets.omega.rows(); ++s) total += targets.omega(s, g);
    log << ' ' << csv::format_double(total / static_cast<double>(targets.omega.rows()));
  }
  log << "\nwrote " << (dir / "oracle.csv").string() << "\n";
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& log,
                std::ostream& err) {
  try {
    if (config.command && *config.command != command) {
      throw ConfigError("config names command '" + *config.command + "' but '" + command +
                        "' was requested");
    }
    if (command == "train") {
      run_train(config, log);
    } else if (command == "explain") {
      run_explain(config, log);
    } else if (command == "benchmark") {
      run_benchmark(config, log);
    } else if (command == "sweep") {
      run_sweep(config, log);
    } else if (command == "oracle") {
      run_oracle(config, log);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const benchmark::ProtocolError& e) {
    err << "protocol error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingDiverged& e) {
    err << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ame::cli
