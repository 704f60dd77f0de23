// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. Settings come from the JSON files
// in configs/, and criterion 9 replays those same files through the CLI commands.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ame/attribution.hpp"
#include "ame/benchmark.hpp"
#include "ame/csv.hpp"
#include "ame/granger.hpp"
#include "ame/runner.hpp"
#include "ame/stats.hpp"
#include "grad_check.hpp"

namespace {

using namespace ame;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kSeeds = 10;

// Uniform integer in [0, n).
std::size_t pick(diff::Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng.engine());
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int criterion, const Outcome& o, double seconds, double budget) {
  const bool in_time = budget <= 0 || seconds < budget;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::string timing = fmt("%.1f s", seconds);
  if (budget > 0) timing += fmt(" of %.0f s budget", budget);
  std::printf("criterion %d: %s  %s [%s]\n", criterion, pass ? "PASS" : "FAIL", o.detail.c_str(),
              timing.c_str());
  std::fflush(stdout);
}

void run_criterion(int criterion, double budget, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  report(criterion, o, seconds_since(start), budget);
}

cli::RunConfig config_file(const std::string& name, std::uint64_t seed) {
  auto c = cli::load_run_config(fs::path(AME_CONFIG_DIR) / name);
  c.seed = seed;
  return cli::resolve(c);
}

AmeModel train(AmeConfig config, const cli::DataSplits& data, TrainingSettings settings) {
  auto model = build_ame(config);
  fit(model, data.train, data.validation, settings);
  return model;
}

// ---------------------------------------------------------------------------------------
// 1: gradients of the blended objective against central differences.

Outcome gradient_correctness() {
  diff::Rng rng(2026);
  double worst = 0;
  std::string where;
  std::size_t checked = 0;
  for (int draw = 0; draw < 6; ++draw) {
    const Task task = draw % 2 ? Task::kClassification : Task::kRegression;
    const bool detach = draw >= 4;
    const std::size_t d = 3 + pick(rng, 4);
    AmeConfig c;
    // Three groups over d features: the first two take one feature each, the last the rest.
    c.feature_partition = {{0}, {1}, {}};
    for (std::size_t f = 2; f < d; ++f) c.feature_partition[2].push_back(f);
    c.expert_hidden = {1 + pick(rng, 8)};
    c.gate_hidden = 1 + pick(rng, 8);
    c.aux_hidden = {1 + pick(rng, 8)};
    c.expert_activation = diff::Activation::kTanh;
    c.aux_activation = diff::Activation::kTanh;
    c.task = task;
    c.alpha = 0.5;
    c.aux_weight = 1.0;
    c.detach_targets = detach;
    c.seed = rng.engine()();
    const auto model = build_ame(c);

    const std::size_t n = 6;
    std::vector<double> xv(n * d), yv;
    for (auto& v : xv) v = rng.normal();
    for (std::size_t r = 0; r < n; ++r) {
      if (task == Task::kRegression) {
        yv.push_back(rng.normal());
      } else {
        const bool one = rng.uniform(0, 1) < 0.5;
        yv.push_back(one ? 0 : 1);
        yv.push_back(one ? 1 : 0);
      }
    }
    const auto x = diff::Tensor::matrix(n, d, xv);
    const auto y = diff::Tensor::matrix(n, c.output_dim(), yv);
    // With detached targets the derivative being checked is the one with Omega frozen.
    const diff::Tensor frozen = granger::objective(model, model.forward(x), y).omega.detach();
    const auto params = model.parameters();
    const auto check = testing::check_gradients(params, [&] {
      return granger::objective(model, model.forward(x), y, detach ? &frozen : nullptr).total;
    });
    checked += check.checked;
    if (check.max_rel_error >= worst) {
      worst = check.max_rel_error;
      where = std::string(to_string(task)) + (detach ? " frozen-omega " : " full ") + check.worst;
    }
  }
  return {worst < 1e-4, fmt("max relative error %.2e over %zu parameter entries (worst %s)", worst,
                            checked, where.c_str())};
}

// ---------------------------------------------------------------------------------------
// 2: attention and Omega rows are distributions; KL is a divergence.

Outcome simplex_invariants() {
  diff::Rng rng(7);
  std::size_t bad_rows = 0, rows = 0, bad_kl = 0, kl_checks = 0;
  double worst_sum = 0;
  const auto check_row = [&](std::span<const double> row) {
    double total = 0;
    bool negative = false;
    for (double v : row) {
      total += v;
      negative |= !(v >= 0);
    }
    worst_sum = std::max(worst_sum, std::fabs(total - 1));
    ++rows;
    if (negative || !(std::fabs(total - 1) <= 1e-6)) ++bad_rows;
  };
  const auto check_kl = [&](std::span<const double> p, std::span<const double> q) {
    // Pinsker: KL >= 2 TV^2, so a positive lower bound separates unequal pairs from zero.
    double tv = 0;
    bool q_covers = true;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tv += 0.5 * std::fabs(p[i] - q[i]);
      q_covers &= !(p[i] > 0 && q[i] <= 0);
    }
    if (!q_covers) return;
    const double kl = granger::kl_divergence(p, q);
    const double self = granger::kl_divergence(p, p);
    ++kl_checks;
    bool ok = kl >= 0 && std::fabs(self) <= 1e-9 && kl >= 2 * tv * tv - 1e-12;
    if (tv >= 1e-3) ok &= kl > 1e-9;
    if (!ok) ++bad_kl;
  };

  for (int draw = 0; draw < 10000; ++draw) {
    AmeConfig c;
    const std::size_t p = 2 + pick(rng, 5);
    c.feature_partition = singleton_partition(p);
    c.expert_hidden = {1 + pick(rng, 6)};
    c.gate_hidden = 1 + pick(rng, 6);
    c.aux_hidden = {1 + pick(rng, 6)};
    c.task = rng.uniform(0, 1) < 0.5 ? Task::kRegression : Task::kClassification;
    c.seed = rng.engine()();
    const auto model = build_ame(c);
    const std::size_t n = 1 + pick(rng, 4);
    const double scale = std::pow(10.0, rng.uniform(-2, 2));
    std::vector<double> xv(n * p), yv;
    for (auto& v : xv) v = scale * rng.normal();
    for (std::size_t r = 0; r < n; ++r) {
      if (c.task == Task::kRegression) {
        yv.push_back(scale * rng.normal());
      } else {
        const bool one = rng.uniform(0, 1) < 0.5;
        yv.push_back(one ? 0 : 1);
        yv.push_back(one ? 1 : 0);
      }
    }
    const diff::NoGradGuard no_grad;
    const auto out = model.forward(diff::Tensor::matrix(n, p, xv));
    const auto targets = granger::targets(out, diff::Tensor::matrix(n, c.output_dim(), yv), c.task);
    const auto attention = Matrix::from_tensor(out.attention);
    for (std::size_t r = 0; r < n; ++r) {
      check_row(attention.row(r));
      check_row(targets.omega.row(r));
      check_kl(targets.omega.row(r), attention.row(r));
    }

    // Independent pairs with exact zeros in both arguments.
    std::vector<double> a(p), b(p);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < p; ++i) {
      a[i] = rng.uniform(0, 1) < 0.2 ? 0.0 : std::exponential_distribution<double>(1.0)(rng.engine());
      b[i] = rng.uniform(0, 1) < 0.2 ? 0.0 : std::exponential_distribution<double>(1.0)(rng.engine());
      sa += a[i];
      sb += b[i];
    }
    if (sa == 0 || sb == 0) continue;
    for (std::size_t i = 0; i < p; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    check_kl(a, b);
  }
  return {bad_rows == 0 && bad_kl == 0 && kl_checks > 10000,
          fmt("%zu/%zu rows off the simplex (max |sum-1| %.1e), %zu/%zu KL checks failed", bad_rows,
              rows, worst_sum, bad_kl, kl_checks)};
}

// ---------------------------------------------------------------------------------------
// 3 and 4 share the per-seed models of the classification config.

struct SeedRun {
  double r2_granger = 0, r2_plain = 0, mge_granger = 0, mge_plain = 0;
  double informed = 0, random = 0;
  double masking_seconds = 0;
};

std::vector<SeedRun> classification_runs;

double attention_r2(const AmeModel& model, const Matrix& x, const Matrix& omega) {
  const auto attention = attribution::explain_ame(model, x).scores;
  const auto r = stats::pearson(attention.values(), omega.values());
  return r ? *r * *r : 0.0;
}

Outcome granger_training_effect() {
  int wins = 0;
  std::string per_seed;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto cfg = config_file("classification.json", seed);
    const auto data = cli::load_data(cfg);
    const auto& groups = cfg.model.feature_partition;
    const auto oracle = attribution::granger_oracle(data.train, data.test, groups, cfg.oracle);

    SeedRun run;
    AmeConfig plain = cfg.model;
    plain.alpha = 0.0;
    const auto plain_model = train(plain, data, cfg.training);
    run.r2_plain = attention_r2(plain_model, data.test.x, oracle.omega);
    run.mge_plain = evaluate(plain_model, data.test).mge;

    const auto start = Clock::now();
    const auto granger_model = train(cfg.model, data, cfg.training);
    run.r2_granger = attention_r2(granger_model, data.test.x, oracle.omega);
    run.mge_granger = evaluate(granger_model, data.test).mge;

    benchmark::MaskingSettings masking;
    masking.fraction = cfg.benchmark.fraction;
    masking.baseline_value = cfg.benchmark.baseline_value;
    masking.n = cfg.benchmark.n;
    masking.seed = cfg.seed;
    const auto m = benchmark::masking_protocol(granger_model,
                                               attribution::explain_ame(granger_model, data.test.x),
                                               data.test.x, groups, masking);
    run.informed = m.informed_drop;
    run.random = m.random_drop;
    run.masking_seconds = seconds_since(start);
    classification_runs.push_back(run);

    const bool win = run.r2_granger > run.r2_plain && run.mge_granger < run.mge_plain;
    wins += win;
    per_seed += fmt(" %d:%.2f/%.2f", seed, run.r2_granger, run.r2_plain);
  }
  return {wins >= 8, fmt("%d/%d seeds with higher r2 and lower MGE for alpha=0.1 (r2 granger/plain:%s)",
                         wins, kSeeds, per_seed.c_str())};
}

Outcome masking_benchmark(double& slowest_seed) {
  int wins = 0;
  std::string per_seed;
  slowest_seed = 0;
  for (std::size_t s = 0; s < classification_runs.size(); ++s) {
    const auto& run = classification_runs[s];
    wins += run.informed >= 2 * run.random;
    slowest_seed = std::max(slowest_seed, run.masking_seconds);
    per_seed += fmt(" %zu:%.2f/%.2f", s, run.informed, run.random);
  }
  return {classification_runs.size() == kSeeds && wins >= 8,
          fmt("%d/%zu seeds with informed drop >= 2x random (informed/random:%s)", wins,
              classification_runs.size(), per_seed.c_str())};
}

// ---------------------------------------------------------------------------------------
// 5: test MGE against masking drop across models of differing explanation quality.

Outcome mge_quality() {
  const auto cfg = config_file("classification.json", 0);
  const auto data = cli::load_data(cfg);
  const auto& bench = cfg.benchmark;
  std::vector<AmeModel> models;
  std::vector<benchmark::ModelEntry> entries;
  for (std::size_t i = 0; i < bench.mge_alphas.size(); ++i) {
    AmeConfig c = cfg.model;
    c.alpha = bench.mge_alphas[i];
    TrainingSettings t = cfg.training;
    if (bench.mge_max_epochs[i] > 0) t.max_epochs = bench.mge_max_epochs[i];
    models.push_back(train(c, data, t));
  }
  std::string detail;
  for (std::size_t i = 0; i < models.size(); ++i) {
    entries.push_back({fmt("alpha=%g", bench.mge_alphas[i]), &models[i]});
  }
  benchmark::MaskingSettings masking;
  masking.fraction = bench.fraction;
  masking.n = bench.n;
  masking.seed = cfg.seed;
  const auto q = benchmark::mge_quality_protocol(entries, data.test, masking);
  std::vector<double> mges;
  for (const auto& row : q.rows) {
    mges.push_back(row.test_mge);
    detail += fmt(" %s mge %.3f drop %.3f;", row.label.c_str(), row.test_mge, row.informed_drop);
  }
  std::sort(mges.begin(), mges.end());
  const bool distinct = std::adjacent_find(mges.begin(), mges.end()) == mges.end();
  const bool negative = q.spearman && *q.spearman < 0;
  return {models.size() >= 3 && distinct && negative,
          fmt("spearman %s over %zu models:%s",
              q.spearman ? fmt("%.2f", *q.spearman).c_str() : "undefined", models.size(),
              detail.c_str())};
}

// ---------------------------------------------------------------------------------------
// 6: alpha sweep.

Outcome alpha_sweep() {
  const auto cfg = config_file("sweep.json", 0);
  benchmark::SweepSettings s;
  s.model = cfg.model;
  s.data = cfg.data.synthetic;
  s.training = cfg.training;
  s.alphas = cfg.sweep.alphas;
  s.runs = cfg.sweep.runs;
  s.seed = cfg.seed;
  const auto result = benchmark::alpha_sweep(s);
  std::vector<double> alphas, mge;
  for (const auto& a : result.aggregates) {
    alphas.push_back(a.alpha);
    mge.push_back(a.mge_mean);
  }
  const auto rho = stats::spearman(alphas, mge);
  const auto& low = result.aggregates.front();
  const auto& high = result.aggregates.back();
  const double increase = high.loss_mean / low.loss_mean - 1;
  const bool grid_ok = result.aggregates.size() == 11 && result.rows.size() == 55 &&
                       low.alpha == 0.0 && high.alpha == 0.1;
  return {grid_ok && rho && *rho <= -0.7 && increase < 0.25,
          fmt("%zu runs, spearman(alpha, mean MGE) %.3f, loss at 0.1 vs 0 %+.1f%%",
              result.rows.size(), rho ? *rho : std::nan(""), 100 * increase)};
}

// ---------------------------------------------------------------------------------------
// 7: attention read-out against occlusion at 64 groups.

Outcome speed_ordering() {
  const auto cfg = config_file("timing.json", 0);
  const auto data = cli::load_data(cfg);
  const auto model = train(cfg.model, data, cfg.training);
  const std::size_t n = cfg.benchmark.timing_samples;
  const std::size_t p = model.num_experts();
  const Matrix samples = data.test.x.slice_rows(0, n);
  const std::string others[] = {"occlusion"};
  const auto rows = benchmark::timing_protocol(model, samples, model.config().feature_partition, others,
                                               cfg.benchmark.timing_batch);
  const auto& ame = rows[0];
  const auto& occ = rows[1];
  const bool counts = ame.forwards == n && occ.forwards == n * (p + 1) && ame.backwards == 0;
  return {p == 64 && n == 256 && counts && ame.seconds < occ.seconds / 5,
          fmt("p=%zu n=%zu: ame %.3f s / %zu forwards, occlusion %.3f s / %zu forwards (ratio %.0f)",
              p, n, ame.seconds, ame.forwards, occ.seconds, occ.forwards, occ.seconds / ame.seconds)};
}

// ---------------------------------------------------------------------------------------
// 8: independent probes against the in-model auxiliary pathway on y = x_1.

Outcome oracle_cross_check() {
  int passes = 0;
  double worst_kl = 0, worst_w = 1;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto cfg = config_file("copy.json", seed);
    const auto data = cli::load_data(cfg);
    const auto& groups = cfg.model.feature_partition;
    const auto oracle = attribution::granger_oracle(data.train, data.test, groups, cfg.oracle);
    const auto model = train(cfg.model, data, cfg.training);
    const diff::NoGradGuard no_grad;
    const auto aux = granger::targets(model.forward(data.test.x.to_tensor()), data.test.y.to_tensor(),
                                      model.task());
    const std::size_t n = data.test.size(), p = groups.size();
    // Both target rows may contain exact zeros; mixing in 1% of the uniform
    // distribution keeps the divergence finite.
    constexpr double lambda = 0.01;
    double w_oracle = 0, w_model = 0, kl = 0;
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> a(p), b(p);
      for (std::size_t j = 0; j < p; ++j) {
        a[j] = (1 - lambda) * oracle.omega(r, j) + lambda / p;
        b[j] = (1 - lambda) * aux.omega(r, j) + lambda / p;
      }
      w_oracle += oracle.omega(r, 0);
      w_model += aux.omega(r, 0);
      kl += granger::kl_divergence(a, b);
    }
    w_oracle /= n;
    w_model /= n;
    kl /= n;
    passes += w_oracle > 0.95 && w_model > 0.95 && kl < 0.1;
    worst_kl = std::max(worst_kl, kl);
    worst_w = std::min({worst_w, w_oracle, w_model});
  }
  return {passes == kSeeds, fmt("%d/%d seeds pass; lowest mean omega_1 %.4f, highest mean KL %.4f",
                                passes, kSeeds, worst_w, worst_kl)};
}

// ---------------------------------------------------------------------------------------
// 9: replay through the CLI commands.

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Artifacts that must match byte for byte. config.json records out_dir and jobs, which
// differ between the two replays by construction.
std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() == "config.json") continue;
    out[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return out;
}

// Blanks wall-clock fields so runs with record_wall_clock on can be compared.
std::string without_wall_clock(const std::string& name, const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  std::getline(in, line);
  out << line << '\n';
  const auto header = csv::split_line(line);
  const auto seconds_col = std::find(header.begin(), header.end(), "seconds") - header.begin();
  while (std::getline(in, line)) {
    auto fields = csv::split_line(line);
    if (name.ends_with("importance.csv")) {
      fields.at(seconds_col) = "-";
    } else if (name.ends_with("benchmark.csv") && fields.at(2).starts_with("seconds")) {
      fields.at(3) = "-";
    }
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << '\n';
  }
  return out.str();
}

struct Replay {
  std::string config;
  std::vector<std::string> commands;
  bool wall_clock = false;
  std::size_t second_jobs = 1;
};

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "ame_acceptance_replay";
  fs::remove_all(root);
  const Replay replays[] = {
      {"classification.json", {"train", "explain", "benchmark", "oracle"}},
      {"classification.json", {"explain", "benchmark"}, true},
      {"copy.json", {"train", "explain", "oracle"}},
      {"timing.json", {"train", "benchmark"}},
      {"sweep.json", {"sweep"}, false, 2},
  };
  std::size_t compared = 0, differing = 0;
  std::string first_difference;
  for (std::size_t i = 0; i < std::size(replays); ++i) {
    const auto& replay = replays[i];
    std::map<std::string, std::string> outputs[2];
    for (int copy = 0; copy < 2; ++copy) {
      auto config = cli::load_run_config(fs::path(AME_CONFIG_DIR) / replay.config);
      config.out_dir = (root / std::to_string(i) / std::to_string(copy)).string();
      config.record_wall_clock = replay.wall_clock;
      config.jobs = copy == 0 ? 1 : replay.second_jobs;
      if (replay.wall_clock) {
        // Reuse the trained model so only the explanation and benchmark stages rerun.
        const auto trained = cli::run_directory(cli::resolve(config));
        fs::create_directories(trained);
        const auto source = root / "0" / std::to_string(copy) / trained.filename();
        fs::copy_file(source / "model.json", trained / "model.json");
      }
      std::ostringstream log, err;
      for (const auto& command : replay.commands) {
        const int code = cli::run_command(command, config, log, err);
        if (code != 0) return {false, replay.config + " " + command + " failed: " + err.str()};
      }
      outputs[copy] = artifacts(config.out_dir);
    }
    for (const auto& [name, text] : outputs[0]) {
      ++compared;
      auto other = outputs[1].count(name) ? outputs[1].at(name) : std::string("<missing>");
      auto mine = text;
      if (replay.wall_clock) {
        mine = without_wall_clock(name, mine);
        other = without_wall_clock(name, other);
      }
      if (mine != other) {
        ++differing;
        if (first_difference.empty()) first_difference = replay.config + ":" + name;
      }
    }
    if (outputs[0].size() != outputs[1].size()) ++differing;
  }
  fs::remove_all(root);
  return {differing == 0 && compared > 0,
          fmt("%zu artifacts compared across %zu replays, %zu differ%s", compared, std::size(replays),
              differing, first_difference.empty() ? "" : (" (first: " + first_difference + ")").c_str())};
}

}  // namespace

int main() {
  run_criterion(1, 10, gradient_correctness);
  run_criterion(2, 30, simplex_invariants);
  run_criterion(3, 600, granger_training_effect);
  double slowest_seed = 0;
  const auto four = masking_benchmark(slowest_seed);
  report(4, four, slowest_seed, 300);
  run_criterion(5, 900, mge_quality);
  run_criterion(6, 3600, alpha_sweep);
  run_criterion(7, 300, speed_ordering);
  run_criterion(8, 300, oracle_cross_check);
  run_criterion(9, 0, determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
