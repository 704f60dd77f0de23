// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ame/model.hpp"
#include "ame/model_io.hpp"
#include "ame/nn.hpp"

namespace ame::synthetic {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::pair<std::string_view, E> (&table)[N],
             std::string_view what) {
  for (const auto& [text, value] : table) {
    if (text == name) return value;
  }
  std::string known;
  for (const auto& [text, value] : table) known += (known.empty() ? "" : ", ") + std::string(text);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "' (expected " +
                    known + ")");
}

constexpr std::pair<std::string_view, Kind> kKinds[] = {
    {"additive_regression", Kind::kAdditiveRegression},
    {"informative_subset_classification", Kind::kInformativeSubsetClassification},
    {"noise_control", Kind::kNoiseControl}};
constexpr std::pair<std::string_view, Link> kLinks[] = {{"identity", Link::kIdentity},
                                                        {"tanh", Link::kTanh}};
constexpr std::pair<std::string_view, Labels> kLabels[] = {{"threshold", Labels::kThreshold},
                                                           {"sampled", Labels::kSampled}};

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::pair<std::string_view, E> (&table)[N]) {
  for (const auto& [text, v] : table) {
    if (v == value) return text;
  }
  return "?";
}

Dataset draw(const SyntheticSpec& spec, std::size_t n, diff::Rng rng) {
  const auto weights = spec.effective_weights();
  const std::size_t d = spec.num_features;
  const bool regression = spec.task() == Task::kRegression;
  Dataset out;
  out.task = spec.task();
  out.x = Matrix(n, d);
  out.y = Matrix(n, regression ? 1 : 2);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) out.x(r, c) = rng.normal();
    double signal = 0.0;
    for (std::size_t k = 0; k < spec.informative.size(); ++k) {
      const double v = out.x(r, spec.informative[k]);
      signal += weights[k] * (spec.link == Link::kTanh ? std::tanh(v) : v);
    }
    const double noisy = signal + spec.noise * rng.normal();
    if (regression) {
      out.y(r, 0) = noisy;
      continue;
    }
    bool positive = false;
    if (spec.kind == Kind::kNoiseControl) {
      positive = rng.uniform(0.0, 1.0) < 0.5;
    } else if (spec.labels == Labels::kThreshold) {
      positive = noisy > 0.0;
    } else {
      positive = rng.uniform(0.0, 1.0) < 1.0 / (1.0 + std::exp(-noisy));
    }
    out.y(r, positive ? 1 : 0) = 1.0;
  }
  return out;
}

}  // namespace

std::string_view to_string(Kind kind) { return name_of(kind, kKinds); }
std::string_view to_string(Link link) { return name_of(link, kLinks); }
std::string_view to_string(Labels labels) { return name_of(labels, kLabels); }
Kind parse_kind(std::string_view name) { return parse_enum(name, kKinds, "dataset kind"); }
Link parse_link(std::string_view name) { return parse_enum(name, kLinks, "link"); }
Labels parse_labels(std::string_view name) { return parse_enum(name, kLabels, "label mode"); }

std::vector<double> SyntheticSpec::effective_weights() const {
  if (!weights.empty()) return weights;
  return std::vector<double>(informative.size(), 1.0);
}

void validate(const SyntheticSpec& spec) {
  if (spec.num_features == 0) throw ConfigError("data.num_features must be >= 1");
  if (spec.informative.size() > spec.num_features) {
    throw ConfigError("data.informative has " + std::to_string(spec.informative.size()) +
                      " entries but there are only " + std::to_string(spec.num_features) +
                      " features");
  }
  if (spec.kind == Kind::kNoiseControl) {
    if (!spec.informative.empty()) throw ConfigError("data.informative must be empty for noise_control");
  } else if (spec.informative.empty()) {
    throw ConfigError("data.informative must not be empty");
  }
  std::set<std::size_t> seen;
  for (auto i : spec.informative) {
    if (i >= spec.num_features) {
      throw ConfigError("data.informative index " + std::to_string(i) + " out of range");
    }
    if (!seen.insert(i).second) {
      throw ConfigError("data.informative repeats index " + std::to_string(i));
    }
  }
  if (!spec.weights.empty() && spec.weights.size() != spec.informative.size()) {
    throw ConfigError("data.weights must match data.informative in length");
  }
  for (double w : spec.weights) {
    if (!std::isfinite(w)) throw ConfigError("data.weights must be finite");
  }
  if (!std::isfinite(spec.noise) || spec.noise < 0.0) throw ConfigError("data.noise must be >= 0");
  if (spec.train == 0) throw ConfigError("data.train must be >= 1");
}

nlohmann::json to_json(const SyntheticSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"num_features", spec.num_features},
          {"informative", spec.informative},
          {"weights", spec.weights},
          {"link", to_string(spec.link)},
          {"labels", to_string(spec.labels)},
          {"noise", spec.noise},
          {"train", spec.train},
          {"validation", spec.validation},
          {"test", spec.test},
          {"seed", spec.seed}};
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  require_known_keys(j,
                     {"kind", "num_features", "informative", "weights", "link", "labels", "noise",
                      "train", "validation", "test", "seed"},
                     "data");
  SyntheticSpec spec;
  try {
    if (j.contains("kind")) spec.kind = parse_kind(j.at("kind").get<std::string>());
    if (j.contains("num_features")) spec.num_features = j.at("num_features").get<std::size_t>();
    if (j.contains("informative")) {
      spec.informative = j.at("informative").get<std::vector<std::size_t>>();
    } else if (spec.kind == Kind::kNoiseControl) {
      spec.informative.clear();
    }
    if (j.contains("weights")) spec.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("link")) spec.link = parse_link(j.at("link").get<std::string>());
    if (j.contains("labels")) spec.labels = parse_labels(j.at("labels").get<std::string>());
    if (j.contains("noise")) spec.noise = j.at("noise").get<double>();
    if (j.contains("train")) spec.train = j.at("train").get<std::size_t>();
    if (j.contains("validation")) spec.validation = j.at("validation").get<std::size_t>();
    if (j.contains("test")) spec.test = j.at("test").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  validate(spec);
  return spec;
}

Splits generate(const SyntheticSpec& spec) {
  validate(spec);
  const diff::Rng root(spec.seed);
  return {draw(spec, spec.train, root.fork(1)), draw(spec, spec.validation, root.fork(2)),
          draw(spec, spec.test, root.fork(3))};
}

}  // namespace ame::synthetic
