// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/attribution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "ame/csv.hpp"
#include "ame/model_io.hpp"
#include "ame/ops.hpp"

namespace ame::attribution {

using diff::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_samples(const Matrix& samples, std::size_t input_dim) {
  if (samples.cols() != input_dim) {
    throw diff::DimensionError("samples have " + std::to_string(samples.cols()) +
                               " features, model expects " + std::to_string(input_dim));
  }
}

void check_groups(const FeaturePartition& groups, std::size_t input_dim) {
  if (validate_partition(groups) != input_dim) {
    throw diff::DimensionError("feature groups cover " + std::to_string(validate_partition(groups)) +
                               " features, model expects " + std::to_string(input_dim));
  }
}

ImportanceReport start_report(std::string estimator, std::string parameters, std::size_t n,
                              std::size_t p) {
  ImportanceReport report;
  report.estimator = std::move(estimator);
  report.parameters = std::move(parameters);
  report.sample_ids.resize(n);
  std::iota(report.sample_ids.begin(), report.sample_ids.end(), 0);
  report.scores = Matrix(n, p);
  report.degenerate.assign(n, 0);
  return report;
}

void store_row(ImportanceReport& report, std::size_t row, std::span<const double> raw) {
  const auto normalized = normalize_scores(raw);
  std::copy(normalized.scores.begin(), normalized.scores.end(), report.scores.row(row).begin());
  report.degenerate[row] = normalized.degenerate ? 1 : 0;
}

double log_prob(double q) { return std::log(q + diff::kLogEpsilon); }

std::string format_param(double v) { return csv::format_double(v); }

}  // namespace

NormalizedScores normalize_scores(std::span<const double> raw) {
  if (raw.empty()) throw diff::DimensionError("normalize_scores needs at least one score");
  NormalizedScores out;
  out.scores.resize(raw.size());
  double total = 0.0;
  for (double v : raw) total += std::fabs(v);
  if (total == 0.0 || !std::isfinite(total)) {
    out.degenerate = true;
    std::fill(out.scores.begin(), out.scores.end(), 1.0 / static_cast<double>(raw.size()));
    return out;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out.scores[i] = std::fabs(raw[i]) / total;
  return out;
}

ImportanceReport explain_ame(const AmeModel& model, const Matrix& samples, std::size_t batch_size) {
  check_samples(samples, model.input_dim());
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  const std::size_t n = samples.rows(), p = model.num_experts();
  auto report = start_report("ame", "batch_size=" + std::to_string(batch_size), n, p);
  report.model_id = model_hash(model);

  const diff::NoGradGuard no_grad;
  const std::size_t before = model.forward_count();
  const auto start = Clock::now();
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    const auto output = model.forward(samples.slice_rows(begin, end).to_tensor(), false);
    const auto a = output.attention.data();
    for (std::size_t r = 0; r < end - begin; ++r) {
      std::copy_n(a.begin() + r * p, p, report.scores.row(begin + r).begin());
    }
  }
  report.seconds = seconds_since(start);
  report.passes.forwards = model.forward_count() - before;
  return report;
}

ImportanceReport explain_saliency(const PredictiveModel& model, const Matrix& samples,
                                  const FeaturePartition& groups) {
  check_samples(samples, model.input_dim());
  check_groups(groups, model.input_dim());
  const std::size_t n = samples.rows(), p = groups.size();
  auto report = start_report("saliency", "target=" + std::string(model.task() == Task::kRegression
                                                                   ? "output"
                                                                   : "predicted_log_prob"),
                             n, p);

  const std::size_t before = model.forward_count();
  const auto start = Clock::now();
  std::vector<double> raw(p);
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = samples.row(s);
    const Tensor x = Tensor::matrix(1, row.size(), {row.begin(), row.end()}, true);
    const Tensor y = model.predict(x);
    Tensor target;
    if (model.task() == Task::kRegression) {
      target = diff::sum(y);
    } else {
      const std::size_t c = argmax(y.data());
      target = diff::sum(diff::log(diff::slice_cols(y, c, c + 1), diff::kLogEpsilon));
    }
    const Tensor inputs[] = {x};
    const auto grads = diff::gradients(target, inputs);
    ++report.passes.backwards;
    for (std::size_t g = 0; g < p; ++g) {
      raw[g] = 0.0;
      for (auto f : groups[g]) raw[g] += std::fabs(grads[0][f]);
    }
    store_row(report, s, raw);
  }
  report.seconds = seconds_since(start);
  report.passes.forwards = model.forward_count() - before;
  return report;
}

ImportanceReport explain_occlusion(const PredictiveModel& model, const Matrix& samples,
                                   const FeaturePartition& groups, double baseline_value,
                                   const Matrix* targets) {
  check_samples(samples, model.input_dim());
  check_groups(groups, model.input_dim());
  if (targets != nullptr && targets->rows() != samples.rows()) {
    throw diff::DimensionError("occlusion: " + std::to_string(targets->rows()) + " targets for " +
                               std::to_string(samples.rows()) + " samples");
  }
  const std::size_t n = samples.rows(), p = groups.size(), d = samples.cols();
  auto report = start_report("occlusion", "baseline=" + format_param(baseline_value), n, p);

  const diff::NoGradGuard no_grad;
  const std::size_t before = model.forward_count();
  const auto start = Clock::now();
  std::vector<double> raw(p);
  std::vector<double> masked(d);
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = samples.row(s);
    const Tensor full = model.predict(Tensor::matrix(1, d, {row.begin(), row.end()}));
    const std::size_t c = argmax(full.data());
    for (std::size_t g = 0; g < p; ++g) {
      std::copy(row.begin(), row.end(), masked.begin());
      for (auto f : groups[g]) masked[f] = baseline_value;
      const Tensor pred = model.predict(Tensor::matrix(1, d, masked));
      double degradation = 0.0;
      if (model.task() == Task::kClassification) {
        degradation = log_prob(full.data()[c]) - log_prob(pred.data()[c]);
      } else if (targets != nullptr) {
        const double truth = (*targets)(s, 0);
        degradation = std::fabs(pred.data()[0] - truth) - std::fabs(full.data()[0] - truth);
      } else {
        degradation = std::fabs(pred.data()[0] - full.data()[0]);
      }
      raw[g] = std::max(0.0, degradation);
    }
    store_row(report, s, raw);
  }
  report.seconds = seconds_since(start);
  report.passes.forwards = model.forward_count() - before;
  return report;
}

void write_importance_csv(std::ostream& out, std::span<const ImportanceReport> reports,
                          bool wall_clock) {
  if (reports.empty()) return;
  const std::size_t p = reports.front().num_groups();
  out << "sample_id,estimator";
  for (std::size_t g = 1; g <= p; ++g) out << ",group_" << g;
  out << ",seconds,forwards,backwards\n";
  for (const auto& report : reports) {
    if (report.num_groups() != p) {
      throw diff::DimensionError("importance reports disagree on the number of groups");
    }
    const std::string seconds = csv::format_double(wall_clock ? report.seconds : 0.0);
    for (std::size_t s = 0; s < report.num_samples(); ++s) {
      out << report.sample_ids[s] << ',' << report.estimator;
      for (double v : report.scores.row(s)) out << ',' << csv::format_double(v);
      out << ',' << seconds << ',' << report.passes.forwards << ',' << report.passes.backwards << '\n';
    }
  }
}

std::vector<ImportanceReport> read_importance_csv(std::istream& in) {
  const auto table = csv::read(in);
  const std::size_t id_col = table.column("sample_id");
  const std::size_t est_col = table.column("estimator");
  const std::size_t sec_col = table.column("seconds");
  const std::size_t fwd_col = table.column("forwards");
  const std::size_t bwd_col = table.column("backwards");
  std::vector<std::size_t> group_cols;
  for (std::size_t g = 1;; ++g) {
    const auto name = "group_" + std::to_string(g);
    if (std::find(table.header.begin(), table.header.end(), name) == table.header.end()) break;
    group_cols.push_back(table.column(name));
  }
  std::vector<ImportanceReport> reports;
  for (const auto& row : table.rows) {
    if (reports.empty() || reports.back().estimator != row[est_col]) {
      ImportanceReport r;
      r.estimator = row[est_col];
      r.scores = Matrix(0, group_cols.size());
      r.seconds = csv::parse_double(row[sec_col]);
      r.passes.forwards = std::stoull(row[fwd_col]);
      r.passes.backwards = std::stoull(row[bwd_col]);
      reports.push_back(std::move(r));
    }
    auto& r = reports.back();
    r.sample_ids.push_back(std::stoull(row[id_col]));
    std::vector<double> scores;
    for (auto c : group_cols) scores.push_back(csv::parse_double(row[c]));
    r.scores.append_row(scores);
    r.degenerate.push_back(0);
  }
  return reports;
}

nlohmann::json to_json(const ImportanceReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < report.num_samples(); ++s) {
    const auto row = report.scores.row(s);
    rows.push_back({{"sample_id", report.sample_ids[s]},
                    {"scores", std::vector<double>(row.begin(), row.end())},
                    {"degenerate", report.degenerate[s] != 0}});
  }
  return {{"estimator", report.estimator},
          {"parameters", report.parameters},
          {"model_id", report.model_id},
          {"seconds", report.seconds},
          {"forwards", report.passes.forwards},
          {"backwards", report.passes.backwards},
          {"samples", std::move(rows)}};
}

namespace {

struct Probe {
  std::vector<std::size_t> columns;  // empty: constant input
  Mlp network;
};

Tensor probe_input(const Probe& probe, const Matrix& x, std::span<const std::size_t> rows) {
  if (probe.columns.empty()) return Tensor::zeros(diff::Shape{rows.size(), 1});
  Matrix out(rows.size(), probe.columns.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < probe.columns.size(); ++c) out(r, c) = x(rows[r], probe.columns[c]);
  return out.to_tensor();
}

Tensor probe_errors(const Probe& probe, const Dataset& data, std::span<const std::size_t> rows) {
  const Tensor pred = probe.network.forward(probe_input(probe, data.x, rows));
  const Tensor truth = data.y.select_rows(rows).to_tensor();
  return data.task == Task::kRegression ? diff::mae_rows(pred, truth)
                                        : diff::cross_entropy_rows(pred, truth);
}

void train_probe(Probe& probe, const Dataset& train, const ProbeConfig& config, diff::Rng rng) {
  std::vector<diff::Parameter> params;
  probe.network.collect(params, "probe");
  diff::OptimizerSettings settings;
  settings.learning_rate = config.learning_rate;
  diff::Optimizer optimizer(settings);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const auto loss = diff::mean(probe_errors(probe, train, {order.data() + begin, end - begin}));
      diff::backward(loss);
      optimizer.step(params);
      diff::zero_grads(params);
    }
  }
}

}  // namespace

granger::GrangerTargets granger_oracle(const Dataset& train, const Dataset& heldout,
                                       const FeaturePartition& groups, const ProbeConfig& config) {
  const std::size_t num_features = validate_partition(groups);
  const std::size_t p = groups.size();
  if (train.x.cols() != num_features || heldout.x.cols() != num_features) {
    throw diff::DimensionError("oracle: datasets do not match the feature groups");
  }
  if (train.size() < 10 * p) {
    throw std::invalid_argument("oracle: " + std::to_string(train.size()) +
                                " training samples is too few for " + std::to_string(p) +
                                " groups (need at least " + std::to_string(10 * p) + ")");
  }
  if (heldout.size() == 0) throw std::invalid_argument("oracle: empty held-out set");
  if (config.batch_size == 0) throw std::invalid_argument("oracle: batch_size must be >= 1");

  const std::size_t out_dim = train.y.cols();
  const auto head = train.task == Task::kRegression ? diff::Activation::kIdentity
                                                    : diff::Activation::kSoftmax;
  const diff::Rng root(config.seed);

  // probes[i] lacks group i; probes[p] sees everything.
  std::vector<Probe> probes(p + 1);
  for (std::size_t k = 0; k <= p; ++k) {
    for (std::size_t g = 0; g < p; ++g) {
      if (g == k) continue;
      probes[k].columns.insert(probes[k].columns.end(), groups[g].begin(), groups[g].end());
    }
    std::sort(probes[k].columns.begin(), probes[k].columns.end());
    diff::Rng init = root.fork(2 * k);
    probes[k].network = make_mlp(std::max<std::size_t>(1, probes[k].columns.size()), config.hidden,
                                 config.activation, out_dim, head, init);
    train_probe(probes[k], train, config, root.fork(2 * k + 1));
  }

  const diff::NoGradGuard no_grad;
  std::vector<std::size_t> rows(heldout.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<Tensor> excluded;
  for (std::size_t k = 0; k < p; ++k) excluded.push_back(probe_errors(probes[k], heldout, rows));
  const Tensor eps_excluded = diff::concat_cols(excluded);
  const Tensor eps_all = probe_errors(probes[p], heldout, rows);

  granger::GrangerTargets out;
  out.eps_excluded = Matrix::from_tensor(eps_excluded);
  out.eps_all.assign(eps_all.data().begin(), eps_all.data().end());
  const Tensor delta = granger::delta_epsilon(eps_excluded, eps_all);
  out.delta_eps = Matrix::from_tensor(delta);
  out.omega = Matrix::from_tensor(granger::omega_targets(delta));
  return out;
}

}  // namespace ame::attribution
