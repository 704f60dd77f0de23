// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "ame/csv.hpp"
#include "ame/model_io.hpp"
#include "ame/stats.hpp"

namespace ame::benchmark {

using diff::Tensor;

namespace {

constexpr double kLogOddsClamp = 1e-9;

void require_classifier(const PredictiveModel& model, std::string_view protocol) {
  if (model.task() != Task::kClassification) {
    throw ProtocolError(std::string(protocol) + " needs a classification model");
  }
}

Matrix predict_all(const PredictiveModel& model, const Matrix& samples) {
  const diff::NoGradGuard no_grad;
  return Matrix::from_tensor(model.predict(samples.to_tensor()));
}

std::size_t masked_count(double fraction, std::size_t p) {
  const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(p)));
  return std::clamp<std::size_t>(m, 1, p);
}

void check_field(const std::string& value, std::string_view column) {
  if (value.find_first_of(",\n\r\"") != std::string::npos) {
    throw std::invalid_argument("benchmark " + std::string(column) + " '" + value +
                                "' contains a CSV delimiter");
  }
}

double misclassification(const Matrix& probs, const Matrix& onehot) {
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (argmax(probs.row(r)) != argmax(onehot.row(r))) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(probs.rows());
}

}  // namespace

double log_odds(double q) {
  const double c = std::clamp(q, kLogOddsClamp, 1.0 - kLogOddsClamp);
  return std::log(c / (1.0 - c));
}

std::vector<std::size_t> top_groups(std::span<const double> scores, std::size_t m) {
  if (m > scores.size()) {
    throw std::invalid_argument("top_groups: asked for " + std::to_string(m) + " of " +
                                std::to_string(scores.size()) + " groups");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(m);
  return order;
}

std::vector<double> mask_and_score(const PredictiveModel& model, const Matrix& samples,
                                   const FeaturePartition& groups,
                                   const std::vector<std::vector<std::size_t>>& masked,
                                   double baseline_value) {
  require_classifier(model, "masking");
  if (masked.size() != samples.rows()) {
    throw diff::DimensionError("masking: " + std::to_string(masked.size()) + " masks for " +
                               std::to_string(samples.rows()) + " samples");
  }
  if (samples.empty()) return {};
  Matrix hidden = samples;
  for (std::size_t s = 0; s < samples.rows(); ++s) {
    for (auto g : masked[s]) {
      if (g >= groups.size()) throw diff::DimensionError("masking: group index out of range");
      for (auto f : groups[g]) hidden(s, f) = baseline_value;
    }
  }
  const Matrix before = predict_all(model, samples);
  const Matrix after = predict_all(model, hidden);
  std::vector<double> drops(samples.rows());
  for (std::size_t s = 0; s < samples.rows(); ++s) {
    const std::size_t c = argmax(before.row(s));
    drops[s] = log_odds(before(s, c)) - log_odds(after(s, c));
  }
  return drops;
}

MaskingResult masking_protocol(const PredictiveModel& model,
                               const attribution::ImportanceReport& report, const Matrix& samples,
                               const FeaturePartition& groups, const MaskingSettings& settings) {
  require_classifier(model, "masking");
  if (!(settings.fraction > 0.0 && settings.fraction < 1.0)) {
    throw std::invalid_argument("masking fraction must lie in (0, 1)");
  }
  if (report.num_groups() != groups.size()) {
    throw diff::DimensionError("masking: report has " + std::to_string(report.num_groups()) +
                               " groups, partition has " + std::to_string(groups.size()));
  }
  const std::size_t n = std::min({settings.n, report.num_samples(), samples.rows()});
  if (n == 0) throw std::invalid_argument("masking: no samples");
  const std::size_t p = groups.size();

  MaskingResult out;
  out.samples = n;
  out.masked_groups = masked_count(settings.fraction, p);
  std::vector<std::vector<std::size_t>> informed(n), random(n);
  diff::Rng rng(settings.seed);
  std::vector<std::size_t> all(p);
  for (std::size_t s = 0; s < n; ++s) {
    informed[s] = top_groups(report.scores.row(s), out.masked_groups);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng.engine());
    random[s].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(out.masked_groups));
  }
  const Matrix head = samples.slice_rows(0, n);
  out.informed = mask_and_score(model, head, groups, informed, settings.baseline_value);
  out.random = mask_and_score(model, head, groups, random, settings.baseline_value);
  out.informed_drop = stats::mean(out.informed);
  out.random_drop = stats::mean(out.random);
  out.paired_t = stats::paired_t(out.informed, out.random);
  return out;
}

MgeQualityResult mge_quality_protocol(std::span<const ModelEntry> models, const Dataset& test,
                                      const MaskingSettings& settings) {
  if (models.size() < 3) {
    throw ProtocolError("mge_quality needs at least 3 models, got " + std::to_string(models.size()));
  }
  MgeQualityResult out;
  std::vector<double> mges, drops;
  for (const auto& entry : models) {
    if (entry.model == nullptr) throw std::invalid_argument("mge_quality: null model");
    const AmeModel& model = *entry.model;
    require_classifier(model, "mge_quality");
    const std::size_t n = std::min(settings.n, test.size());
    const Matrix samples = test.x.slice_rows(0, n);
    const auto report = attribution::explain_ame(model, samples);
    const auto masking =
        masking_protocol(model, report, samples, model.config().feature_partition, settings);
    MgeQualityRow row{entry.label, evaluate(model, test).mge, masking.informed_drop,
                      masking.random_drop, model_hash(model)};
    mges.push_back(row.test_mge);
    drops.push_back(row.informed_drop);
    out.rows.push_back(std::move(row));
  }
  out.spearman = stats::spearman(mges, drops);
  return out;
}

std::vector<double> mean_scores(const attribution::ImportanceReport& report) {
  if (report.num_samples() == 0) throw std::invalid_argument("empty importance report");
  std::vector<double> means(report.num_groups(), 0.0);
  for (std::size_t s = 0; s < report.num_samples(); ++s) {
    const auto row = report.scores.row(s);
    for (std::size_t g = 0; g < means.size(); ++g) means[g] += row[g];
  }
  for (auto& m : means) m /= static_cast<double>(report.num_samples());
  return means;
}

std::size_t recall_at_k(const attribution::ImportanceReport& report,
                        std::span<const std::size_t> truth, std::size_t k) {
  const auto top = top_groups(mean_scores(report), k);
  return static_cast<std::size_t>(std::count_if(top.begin(), top.end(), [&](std::size_t g) {
    return std::find(truth.begin(), truth.end(), g) != truth.end();
  }));
}

attribution::ImportanceReport run_estimator(const std::string& name, const AmeModel& model,
                                            const Matrix& samples, double baseline_value) {
  const auto& groups = model.config().feature_partition;
  if (name == "ame") return attribution::explain_ame(model, samples);
  if (name == "saliency") return attribution::explain_saliency(model, samples, groups);
  if (name == "occlusion") {
    return attribution::explain_occlusion(model, samples, groups, baseline_value);
  }
  throw ConfigError("unknown estimator '" + name + "' (expected ame, saliency, occlusion)");
}

std::vector<TimingRow> timing_protocol(const AmeModel& model, const Matrix& samples,
                                       const FeaturePartition& groups,
                                       std::span<const std::string> estimators,
                                       std::size_t ame_batch) {
  std::vector<TimingRow> rows;
  const auto record = [&](const attribution::ImportanceReport& r) {
    rows.push_back({r.estimator, r.seconds, r.passes.forwards, r.passes.backwards, 0.0, 0.0});
  };
  record(attribution::explain_ame(model, samples, ame_batch));
  for (const auto& name : estimators) {
    if (name == "ame") continue;
    if (name == "saliency") {
      record(attribution::explain_saliency(model, samples, groups));
    } else if (name == "occlusion") {
      record(attribution::explain_occlusion(model, samples, groups));
    } else {
      throw ConfigError("unknown estimator '" + name + "'");
    }
  }
  const TimingRow base = rows.front();
  for (auto& row : rows) {
    row.seconds_ratio = base.seconds > 0.0 ? row.seconds / base.seconds : 0.0;
    row.forward_ratio = base.forwards > 0 ? static_cast<double>(row.forwards) /
                                                static_cast<double>(base.forwards)
                                          : 0.0;
  }
  return rows;
}

AmeConfig resolve_model_config(AmeConfig config, const synthetic::SyntheticSpec& data) {
  if (config.feature_partition.empty()) config.feature_partition = singleton_partition(data.num_features);
  config.task = data.task();
  if (config.task == Task::kClassification) config.num_classes = 2;
  return config;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  return grid;
}

std::vector<SweepJob> sweep_jobs(const SweepSettings& settings) {
  if (settings.alphas.empty()) throw ConfigError("sweep.alphas must not be empty");
  if (settings.runs == 0) throw ConfigError("sweep.runs must be >= 1");
  std::vector<SweepJob> jobs;
  for (double alpha : settings.alphas) {
    for (std::size_t r = 0; r < settings.runs; ++r) jobs.push_back({alpha, r, settings.seed + r});
  }
  return jobs;
}

TrainedJob run_sweep_job(const SweepSettings& settings, const SweepJob& job) {
  auto data_spec = settings.data;
  data_spec.seed = job.seed;
  const auto splits = synthetic::generate(data_spec);
  auto config = resolve_model_config(settings.model, data_spec);
  config.alpha = job.alpha;
  config.seed = job.seed;
  AmeModel model = build_ame(config);
  auto training = fit(model, splits.train, splits.validation, settings.training);

  const auto metrics = evaluate(model, splits.test);
  SweepRow row;
  row.alpha = job.alpha;
  row.seed = job.seed;
  row.test_loss = metrics.main_loss;
  row.test_error = config.task == Task::kRegression
                       ? metrics.main_loss
                       : misclassification(predict_all(model, splits.test.x), splits.test.y);
  row.test_mge = metrics.mge;
  row.epochs = training.epochs_run;
  row.model_hash = model_hash(model);
  return {std::move(row), std::move(model), std::move(training)};
}

SweepResult alpha_sweep(const SweepSettings& settings, const SweepHooks& hooks) {
  const auto jobs = sweep_jobs(settings);
  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        if (hooks.lookup) {
          if (auto cached = hooks.lookup(jobs[i])) {
            rows[i] = std::move(*cached);
            continue;
          }
        }
        auto trained = run_sweep_job(settings, jobs[i]);
        if (hooks.store) hooks.store(jobs[i], trained);
        rows[i] = std::move(trained.row);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(settings.jobs, 1, jobs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.alpha, a.seed) < std::tie(b.alpha, b.seed);
  });
  SweepResult result;
  result.aggregates = aggregate(rows);
  result.rows = std::move(rows);
  return result;
}

std::vector<SweepAggregate> aggregate(std::span<const SweepRow> rows) {
  std::map<double, std::vector<const SweepRow*>> by_alpha;
  for (const auto& row : rows) by_alpha[row.alpha].push_back(&row);
  std::vector<SweepAggregate> out;
  for (const auto& [alpha, members] : by_alpha) {
    std::vector<double> loss, error, mge;
    for (const auto* r : members) {
      loss.push_back(r->test_loss);
      error.push_back(r->test_error);
      mge.push_back(r->test_mge);
    }
    out.push_back({alpha, members.size(), stats::mean(loss), stats::sd(loss), stats::mean(error),
                   stats::sd(error), stats::mean(mge), stats::sd(mge)});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  using csv::format_double;
  out << "kind,alpha,seed,runs,test_loss,test_loss_sd,test_error,test_error_sd,test_mge,"
         "test_mge_sd,epochs,model_hash\n";
  for (const auto& r : result.rows) {
    check_field(r.model_hash, "model_hash");
    out << "run," << format_double(r.alpha) << ',' << r.seed << ",1," << format_double(r.test_loss)
        << ",0," << format_double(r.test_error) << ",0," << format_double(r.test_mge) << ",0,"
        << r.epochs << ',' << r.model_hash << '\n';
  }
  for (const auto& a : result.aggregates) {
    out << "aggregate," << format_double(a.alpha) << ",," << a.runs << ','
        << format_double(a.loss_mean) << ',' << format_double(a.loss_sd) << ','
        << format_double(a.error_mean) << ',' << format_double(a.error_sd) << ','
        << format_double(a.mge_mean) << ',' << format_double(a.mge_sd) << ",,\n";
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  const auto table = csv::read(in);
  const auto col = [&](std::string_view name) { return table.column(name); };
  const std::size_t kind = col("kind"), alpha = col("alpha"), seed = col("seed"), runs = col("runs"),
                    loss = col("test_loss"), loss_sd = col("test_loss_sd"),
                    error = col("test_error"), error_sd = col("test_error_sd"),
                    mge = col("test_mge"), mge_sd = col("test_mge_sd"), epochs = col("epochs"),
                    hash = col("model_hash");
  SweepResult result;
  for (const auto& row : table.rows) {
    const auto num = [&](std::size_t c) { return csv::parse_double(row[c]); };
    if (row[kind] == "run") {
      result.rows.push_back({num(alpha), std::stoull(row[seed]), num(loss), num(error), num(mge),
                             static_cast<std::size_t>(std::stoull(row[epochs])), row[hash]});
    } else if (row[kind] == "aggregate") {
      result.aggregates.push_back({num(alpha), static_cast<std::size_t>(std::stoull(row[runs])),
                                   num(loss), num(loss_sd), num(error), num(error_sd), num(mge),
                                   num(mge_sd)});
    } else {
      throw std::invalid_argument("sweep csv: unknown row kind '" + row[kind] + "'");
    }
  }
  return result;
}

bool MetricRow::operator==(const MetricRow& other) const {
  const bool same_value =
      value == other.value || (std::isnan(value) && std::isnan(other.value));
  return protocol == other.protocol && estimator == other.estimator && metric == other.metric &&
         same_value && seed == other.seed && model_hash == other.model_hash;
}

void append_masking(BenchmarkResult& out, const MaskingResult& result, const std::string& estimator,
                    std::uint64_t seed, const std::string& model_hash) {
  const auto add = [&](const std::string& metric, double value) {
    out.rows.push_back({"masking", estimator, metric, value, seed, model_hash});
  };
  add("samples", static_cast<double>(result.samples));
  add("masked_groups", static_cast<double>(result.masked_groups));
  add("log_odds_drop", result.informed_drop);
  add("random_log_odds_drop", result.random_drop);
  add("paired_t", result.paired_t.value_or(std::nan("")));
}

void append_mge_quality(BenchmarkResult& out, const MgeQualityResult& result, std::uint64_t seed) {
  for (const auto& row : result.rows) {
    out.rows.push_back({"mge_quality", row.label, "test_mge", row.test_mge, seed, row.model_hash});
    out.rows.push_back(
        {"mge_quality", row.label, "log_odds_drop", row.informed_drop, seed, row.model_hash});
    out.rows.push_back(
        {"mge_quality", row.label, "random_log_odds_drop", row.random_drop, seed, row.model_hash});
  }
  std::string hashes;
  for (const auto& row : result.rows) hashes += (hashes.empty() ? "" : "+") + row.model_hash;
  out.rows.push_back({"mge_quality", "ame", "spearman_mge_vs_drop",
                      result.spearman.value_or(std::nan("")), seed, fnv1a_hex(hashes)});
}

void append_recall(BenchmarkResult& out, const std::string& estimator, std::size_t k,
                   std::size_t recall, std::uint64_t seed, const std::string& model_hash) {
  out.rows.push_back({"recall", estimator, "recall_at_" + std::to_string(k),
                      static_cast<double>(recall), seed, model_hash});
}

void append_timing(BenchmarkResult& out, std::span<const TimingRow> rows, std::uint64_t seed,
                   const std::string& model_hash, bool wall_clock) {
  for (const auto& r : rows) {
    const auto add = [&](const std::string& metric, double value) {
      out.rows.push_back({"timing", r.estimator, metric, value, seed, model_hash});
    };
    add("seconds", wall_clock ? r.seconds : 0.0);
    add("forwards", static_cast<double>(r.forwards));
    add("backwards", static_cast<double>(r.backwards));
    add("seconds_ratio", wall_clock ? r.seconds_ratio : 0.0);
    add("forward_ratio", r.forward_ratio);
  }
}

void write_benchmark_csv(std::ostream& out, const BenchmarkResult& result) {
  out << "protocol,estimator,metric,value,seed,model_hash\n";
  for (const auto& r : result.rows) {
    check_field(r.protocol, "protocol");
    check_field(r.estimator, "estimator");
    check_field(r.metric, "metric");
    check_field(r.model_hash, "model_hash");
    out << r.protocol << ',' << r.estimator << ',' << r.metric << ','
        << csv::format_double(r.value) << ',' << r.seed << ',' << r.model_hash << '\n';
  }
}

BenchmarkResult read_benchmark_csv(std::istream& in) {
  const auto table = csv::read(in);
  const std::size_t protocol = table.column("protocol"), estimator = table.column("estimator"),
                    metric = table.column("metric"), value = table.column("value"),
                    seed = table.column("seed"), hash = table.column("model_hash");
  BenchmarkResult result;
  for (const auto& row : table.rows) {
    result.rows.push_back({row[protocol], row[estimator], row[metric],
                           csv::parse_double(row[value]), std::stoull(row[seed]), row[hash]});
  }
  return result;
}

}  // namespace ame::benchmark
