// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ame::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sd(std::span<const double> xs);

/// nullopt when either side has zero variance or fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// 1-based ranks, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

/// t statistic of the mean of a - b. nullopt when the differences have zero spread.
std::optional<double> paired_t(std::span<const double> a, std::span<const double> b);

}  // namespace ame::stats
