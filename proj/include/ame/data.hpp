// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ame/tensor.hpp"

namespace ame {

/// Row-major value matrix used for datasets and per-sample results. Not on any tape.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_tensor(const diff::Tensor& t);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  const std::vector<double>& values() const { return values_; }

  void append_row(std::span<const double> row);
  Matrix select_rows(std::span<const std::size_t> indices) const;
  Matrix slice_rows(std::size_t begin, std::size_t end) const;

  diff::Tensor to_tensor(bool requires_grad = false) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class Task { kRegression, kClassification };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// Features plus targets. Regression targets are [n x 1]; classification targets are
/// one-hot [n x k].
struct Dataset {
  Matrix x;
  Matrix y;
  Task task = Task::kRegression;

  std::size_t size() const { return x.rows(); }
  Dataset select(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
};

/// Class index with the largest value; lowest index on ties.
std::size_t argmax(std::span<const double> values);

}  // namespace ame
