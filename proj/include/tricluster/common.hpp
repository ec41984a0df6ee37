#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tricluster {

// Row-major so factor rows (one entity each) are contiguous.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Index = std::ptrdiff_t;

// Raised for malformed input: shapes, bounds, parse failures, invalid parameters.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the numerics go bad (NaN/Inf objective, negative update terms).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Number of worker threads a kernel may use. Output rows are partitioned
// between workers, so results do not depend on the thread count.
struct Parallelism {
  int threads = 1;
};

std::string shape_str(Index rows, Index cols);

template <typename M>
std::string shape_of(const M& m) {
  return shape_str(m.rows(), m.cols());
}

}  // namespace tricluster
