#include "tricluster/kernels.hpp"

#include <cmath>

#include <fmt/format.h>

#include "parallel.hpp"

namespace tricluster {
namespace {

// Row-compressed (ptr, idx, val) times dense B.
DenseMatrix csr_times(Index out_rows, std::span<const Index> ptr, std::span<const Index> idx,
                      std::span<const double> val, const DenseMatrix& b, Parallelism par) {
  DenseMatrix out = DenseMatrix::Zero(out_rows, b.cols());
  detail::parallel_rows(out_rows, par, [&](Index begin, Index end) {
    for (Index r = begin; r < end; ++r) {
      auto row = out.row(r);
      for (Index p = ptr[r]; p < ptr[r + 1]; ++p) row.noalias() += val[p] * b.row(idx[p]);
    }
  });
  return out;
}

void require_same_shape(const char* what, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError(fmt::format("{}: shape mismatch {} vs {}", what, shape_of(a), shape_of(b)));
  }
}

}  // namespace

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b, Parallelism par) {
  if (a.cols() != b.rows()) {
    throw InputError(fmt::format("spmm: inner dimensions disagree, {} times {}", shape_of(a),
                                 shape_of(b)));
  }
  return csr_times(a.rows(), a.row_ptr(), a.col_idx(), a.values(), b, par);
}

DenseMatrix spmm_t(const SparseMatrix& a, const DenseMatrix& b, Parallelism par) {
  if (a.rows() != b.rows()) {
    throw InputError(fmt::format("spmm_t: row counts disagree, {}^T times {}", shape_of(a),
                                 shape_of(b)));
  }
  return csr_times(a.cols(), a.t_row_ptr(), a.t_col_idx(), a.t_values(), b, par);
}

DenseMatrix gram(const DenseMatrix& b) {
  const Index k = b.cols();
  DenseMatrix out(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) {
      const double v = b.col(i).dot(b.col(j));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

SignSplit split_pos_neg(const DenseMatrix& m) {
  return {m.cwiseMax(0.0), (-m).cwiseMax(0.0)};
}

DenseMatrix hadamard_sqrt_update(const DenseMatrix& s, const DenseMatrix& numer,
                                 const DenseMatrix& denom, double eps) {
  require_same_shape("hadamard_sqrt_update (numerator)", s, numer);
  require_same_shape("hadamard_sqrt_update (denominator)", s, denom);
  if (!(eps > 0.0)) throw InputError("hadamard_sqrt_update: eps must be positive");

  DenseMatrix out(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      const double sv = s(i, j), nv = numer(i, j), dv = denom(i, j);
      if (!(sv >= 0.0) || !(nv >= 0.0) || !(dv >= 0.0)) {
        throw NumericError(fmt::format(
            "hadamard_sqrt_update: negative or NaN term at ({}, {}): s={} numer={} denom={}", i, j,
            sv, nv, dv));
      }
      out(i, j) = sv * std::sqrt(nv / (dv + eps));
    }
  }
  return out;
}

double frob_residual_sq(const SparseMatrix& x, const DenseMatrix& a,
                        const std::optional<DenseMatrix>& h, const DenseMatrix& b,
                        Parallelism par) {
  const Index inner = h ? h->cols() : a.cols();
  const bool ok = x.rows() == a.rows() && x.cols() == b.rows() && inner == b.cols() &&
                  (!h || h->rows() == a.cols());
  if (!ok) {
    throw InputError(fmt::format("frob_residual_sq: X {} does not match A {} H {} B^T {}",
                                 shape_of(x), shape_of(a),
                                 h ? shape_of(*h) : std::string("identity"), shape_of(b)));
  }
  const DenseMatrix ah = h ? DenseMatrix(a * *h) : a;

  // tr(X^T A H B^T) only touches the stored entries of X.
  Vector partial = Vector::Zero(x.rows());
  const auto ptr = x.row_ptr();
  const auto idx = x.col_idx();
  const auto val = x.values();
  detail::parallel_rows(x.rows(), par, [&](Index begin, Index end) {
    for (Index r = begin; r < end; ++r) {
      double acc = 0.0;
      for (Index p = ptr[r]; p < ptr[r + 1]; ++p) acc += val[p] * ah.row(r).dot(b.row(idx[p]));
      partial(r) = acc;
    }
  });
  const double cross = partial.sum();
  const double model = gram(ah).cwiseProduct(gram(b)).sum();
  return std::max(0.0, x.squared_norm() - 2.0 * cross + model);
}

GraphLaplacian laplacian_parts(const SparseMatrix& g) {
  if (g.rows() != g.cols()) {
    throw InputError(fmt::format("user graph must be square, got {}", shape_of(g)));
  }
  double worst = 0.0;
  Index wi = -1, wj = -1;
  Index loops = 0;
  std::vector<Triplet> halves;
  halves.reserve(2 * static_cast<std::size_t>(g.nnz()));
  for (const auto& e : g.entries()) {
    if (e.row == e.col) {
      ++loops;
      continue;
    }
    const double gap = std::abs(e.value - g.at(e.col, e.row));
    if (gap > worst) {
      worst = gap;
      wi = e.row;
      wj = e.col;
    }
    halves.push_back({e.row, e.col, 0.5 * e.value});
    halves.push_back({e.col, e.row, 0.5 * e.value});
  }
  if (worst > kSymmetryTolerance) {
    throw InputError(fmt::format(
        "user graph is not symmetric: G({0},{1})={2} but G({1},{0})={3} (difference {4})", wi, wj,
        g.at(wi, wj), g.at(wj, wi), worst));
  }

  GraphLaplacian lap;
  lap.adjacency = SparseMatrix(g.rows(), g.cols(), halves);
  lap.degree = Vector::Zero(g.rows());
  const auto ptr = lap.adjacency.row_ptr();
  const auto val = lap.adjacency.values();
  for (Index r = 0; r < g.rows(); ++r)
    for (Index p = ptr[r]; p < ptr[r + 1]; ++p) lap.degree(r) += val[p];
  lap.self_loops_dropped = loops;
  return lap;
}

double trace_quadratic(const DenseMatrix& s, const GraphLaplacian& lap) {
  if (s.rows() != lap.size()) {
    throw InputError(fmt::format("trace_quadratic: factor {} does not match graph of {} nodes",
                                 shape_of(s), lap.size()));
  }
  double diag = 0.0;
  for (Index i = 0; i < s.rows(); ++i) diag += lap.degree(i) * s.row(i).squaredNorm();
  double off = 0.0;
  for (const auto& e : lap.adjacency.entries()) off += e.value * s.row(e.row).dot(s.row(e.col));
  return diag - off;
}

DenseMatrix adjacency_times(const GraphLaplacian& lap, const DenseMatrix& s, Parallelism par) {
  return spmm(lap.adjacency, s, par);
}

DenseMatrix degree_times(const GraphLaplacian& lap, const DenseMatrix& s) {
  if (s.rows() != lap.size()) {
    throw InputError(fmt::format("degree_times: factor {} does not match graph of {} nodes",
                                 shape_of(s), lap.size()));
  }
  return lap.degree.asDiagonal() * s;
}

}  // namespace tricluster
