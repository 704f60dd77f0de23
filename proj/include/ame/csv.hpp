// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// Minimal comma-separated I/O for the artifacts this project writes: a header row,
// '.' decimals, no quoting (fields never contain commas or newlines).
namespace ame::csv {

/// Shortest text that parses back to the same double ("%.17g" fallback).
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws if absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

}  // namespace ame::csv
