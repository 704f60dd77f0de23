// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/data.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ame {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw diff::DimensionError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                               " given " + std::to_string(values_.size()) + " values");
  }
}

Matrix Matrix::from_tensor(const diff::Tensor& t) {
  const auto data = t.data();
  if (t.rank() == 2) return Matrix(t.rows(), t.cols(), {data.begin(), data.end()});
  if (t.rank() == 1) return Matrix(1, t.numel(), {data.begin(), data.end()});
  throw diff::DimensionError("Matrix::from_tensor needs rank 1 or 2, got " + diff::to_string(t.shape()));
}

void Matrix::append_row(std::span<const double> row) {
  if (rows_ == 0 && cols_ == 0) cols_ = row.size();
  if (row.size() != cols_) {
    throw diff::DimensionError("append_row: row of " + std::to_string(row.size()) +
                               " values into a matrix with " + std::to_string(cols_) + " columns");
  }
  values_.insert(values_.end(), row.begin(), row.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw std::out_of_range("select_rows: row index out of range");
    std::copy_n(values_.begin() + indices[i] * cols_, cols_, out.values_.begin() + i * cols_);
  }
  return out;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw std::out_of_range("slice_rows: range out of bounds");
  return Matrix(end - begin, cols_,
                {values_.begin() + begin * cols_, values_.begin() + end * cols_});
}

diff::Tensor Matrix::to_tensor(bool requires_grad) const {
  return diff::Tensor::matrix(rows_, cols_, values_, requires_grad);
}

std::string_view to_string(Task task) {
  return task == Task::kRegression ? "regression" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::kRegression;
  if (name == "classification") return Task::kClassification;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  return Dataset{x.select_rows(indices), y.select_rows(indices), task};
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  return Dataset{x.slice_rows(0, n), y.slice_rows(0, n), task};
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace ame
