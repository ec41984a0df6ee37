#include "tricluster/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace tricluster {

std::string shape_str(Index rows, Index cols) { return fmt::format("{}x{}", rows, cols); }

SparseMatrix::SparseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw InputError("sparse matrix: negative dimension");
  row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
  t_row_ptr_.assign(static_cast<std::size_t>(cols) + 1, 0);
}

SparseMatrix::SparseMatrix(Index rows, Index cols, std::span<const Triplet> entries)
    : SparseMatrix(rows, cols) {
  std::vector<Triplet> sorted(entries.begin(), entries.end());
  for (const auto& e : sorted) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw InputError(fmt::format("sparse matrix: entry ({}, {}) out of bounds for {}", e.row,
                                   e.col, shape_str(rows, cols)));
    }
    if (!std::isfinite(e.value) || e.value < 0.0) {
      throw InputError(fmt::format("sparse matrix: entry ({}, {}) has invalid weight {}", e.row,
                                   e.col, e.value));
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  col_idx_.reserve(sorted.size());
  values_.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    const Triplet& head = sorted[i];
    double sum = 0.0;
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].row == head.row && sorted[j].col == head.col; ++j) {
      sum += sorted[j].value;
    }
    col_idx_.push_back(head.col);
    values_.push_back(sum);
    ++row_ptr_[static_cast<std::size_t>(head.row) + 1];
    i = j;
  }
  for (std::size_t r = 0; r < static_cast<std::size_t>(rows_); ++r) row_ptr_[r + 1] += row_ptr_[r];
  build_transpose();
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& m) {
  std::vector<Triplet> trips;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) trips.push_back({i, j, m(i, j)});
  return SparseMatrix(m.rows(), m.cols(), trips);
}

void SparseMatrix::build_transpose() {
  t_row_ptr_.assign(static_cast<std::size_t>(cols_) + 1, 0);
  for (Index c : col_idx_) ++t_row_ptr_[static_cast<std::size_t>(c) + 1];
  for (std::size_t c = 0; c < static_cast<std::size_t>(cols_); ++c) t_row_ptr_[c + 1] += t_row_ptr_[c];
  t_col_idx_.assign(col_idx_.size(), 0);
  t_values_.assign(values_.size(), 0.0);
  std::vector<Index> cursor(t_row_ptr_.begin(), t_row_ptr_.end() - 1);
  for (Index r = 0; r < rows_; ++r) {
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const auto slot = static_cast<std::size_t>(cursor[static_cast<std::size_t>(col_idx_[p])]++);
      t_col_idx_[slot] = r;
      t_values_[slot] = values_[p];
    }
  }
}

std::vector<Triplet> SparseMatrix::entries() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (Index r = 0; r < rows_; ++r)
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out.push_back({r, col_idx_[p], values_[p]});
  return out;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(rows_, cols_);
  for (Index r = 0; r < rows_; ++r)
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out(r, col_idx_[p]) = values_[p];
  return out;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows_ = cols_;
  t.cols_ = rows_;
  t.row_ptr_ = t_row_ptr_;
  t.col_idx_ = t_col_idx_;
  t.values_ = t_values_;
  t.t_row_ptr_ = row_ptr_;
  t.t_col_idx_ = col_idx_;
  t.t_values_ = values_;
  return t;
}

double SparseMatrix::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double SparseMatrix::at(Index row, Index col) const {
  const auto begin = col_idx_.begin() + row_ptr_[row];
  const auto end = col_idx_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

}  // namespace tricluster
