// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ame/data.hpp"

namespace ame::synthetic {

enum class Kind { kAdditiveRegression, kInformativeSubsetClassification, kNoiseControl };
enum class Link { kIdentity, kTanh };
enum class Labels { kThreshold, kSampled };

std::string_view to_string(Kind kind);
std::string_view to_string(Link link);
std::string_view to_string(Labels labels);
Kind parse_kind(std::string_view name);
Link parse_link(std::string_view name);
Labels parse_labels(std::string_view name);

/// Features are i.i.d. standard normal. The signal is s = sum_{i in S} w_i g(x_i);
/// regression targets are s + noise * N(0,1); classification draws the logit
/// s + noise * N(0,1) and thresholds it at 0 or samples a label from sigmoid(logit).
/// noise_control ignores the features entirely.
struct SyntheticSpec {
  Kind kind = Kind::kInformativeSubsetClassification;
  std::size_t num_features = 8;
  std::vector<std::size_t> informative{0, 1, 2, 3};  // 0-based
  std::vector<double> weights;  // empty: 1 for every informative feature
  Link link = Link::kIdentity;
  Labels labels = Labels::kThreshold;
  double noise = 0.1;
  std::size_t train = 2000;
  std::size_t validation = 500;
  std::size_t test = 500;
  std::uint64_t seed = 0;

  Task task() const {
    return kind == Kind::kAdditiveRegression ? Task::kRegression : Task::kClassification;
  }
  /// Weights with the empty default expanded.
  std::vector<double> effective_weights() const;
  bool operator==(const SyntheticSpec&) const = default;
};

/// Throws ConfigError.
void validate(const SyntheticSpec& spec);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const nlohmann::json& j);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Each split is drawn from its own stream forked off the seed, so the splits are
/// disjoint draws and resizing one split leaves the others unchanged.
Splits generate(const SyntheticSpec& spec);

}  // namespace ame::synthetic
