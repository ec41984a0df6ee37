#pragma once

#include <optional>

#include "tricluster/common.hpp"
#include "tricluster/sparse_matrix.hpp"

namespace tricluster {

// A = plus - minus with both parts non-negative and disjointly supported.
struct SignSplit {
  DenseMatrix plus;
  DenseMatrix minus;
};

// Symmetric non-negative graph with zero diagonal, split as L = D - G.
struct GraphLaplacian {
  SparseMatrix adjacency;
  Vector degree;
  Index self_loops_dropped = 0;

  Index size() const { return adjacency.rows(); }
};

inline constexpr double kSymmetryTolerance = 1e-9;

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b, Parallelism par = {});

// A^T * B without materializing A^T.
DenseMatrix spmm_t(const SparseMatrix& a, const DenseMatrix& b, Parallelism par = {});

// B^T * B, exactly symmetric.
DenseMatrix gram(const DenseMatrix& b);

SignSplit split_pos_neg(const DenseMatrix& m);

// S o sqrt(numer / (denom + eps)). All inputs must be non-negative; a negative
// entry means the caller assembled the update terms wrong.
DenseMatrix hadamard_sqrt_update(const DenseMatrix& s, const DenseMatrix& numer,
                                 const DenseMatrix& denom, double eps);

// ||X - A*H*B^T||_F^2 without forming the dense product. An empty `h` means
// the identity. Clamped at zero.
double frob_residual_sq(const SparseMatrix& x, const DenseMatrix& a,
                        const std::optional<DenseMatrix>& h, const DenseMatrix& b,
                        Parallelism par = {});

// Validates and symmetrizes G. Asymmetry up to kSymmetryTolerance is averaged
// away; beyond it the input is rejected. Self-loops are dropped and counted.
GraphLaplacian laplacian_parts(const SparseMatrix& g);

// tr(S^T (D - G) S).
double trace_quadratic(const DenseMatrix& s, const GraphLaplacian& lap);

// G*S and D*S, the two halves of L*S used by the user update.
DenseMatrix adjacency_times(const GraphLaplacian& lap, const DenseMatrix& s,
                            Parallelism par = {});
DenseMatrix degree_times(const GraphLaplacian& lap, const DenseMatrix& s);

}  // namespace tricluster
