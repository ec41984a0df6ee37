#pragma once

#include <span>
#include <vector>

#include "tricluster/common.hpp"

namespace tricluster {

struct Triplet {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

// Non-negative sparse matrix. Built from coordinate triplets; duplicate
// coordinates are summed. Stored row-compressed together with a
// row-compressed copy of the transpose so both A*B and A^T*B run
// row-parallel.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols);
  SparseMatrix(Index rows, Index cols, std::span<const Triplet> entries);

  static SparseMatrix from_dense(const DenseMatrix& m);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  // Entries in row-major order, one per (row, col).
  std::vector<Triplet> entries() const;
  DenseMatrix to_dense() const;
  SparseMatrix transposed() const;

  double squared_norm() const;
  double at(Index row, Index col) const;

  // Row-compressed views.
  std::span<const Index> row_ptr() const { return row_ptr_; }
  std::span<const Index> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  // Row-compressed views of the transpose.
  std::span<const Index> t_row_ptr() const { return t_row_ptr_; }
  std::span<const Index> t_col_idx() const { return t_col_idx_; }
  std::span<const double> t_values() const { return t_values_; }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ &&
           a.col_idx_ == b.col_idx_ && a.values_ == b.values_;
  }

 private:
  void build_transpose();

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
  std::vector<Index> t_row_ptr_{0};
  std::vector<Index> t_col_idx_;
  std::vector<double> t_values_;
};

}  // namespace tricluster
