#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "tricluster/common.hpp"

namespace tricluster::detail {

// Calls fn(begin, end) over disjoint contiguous slices of [0, n).
template <typename Fn>
void parallel_rows(Index n, Parallelism par, Fn&& fn) {
  const Index workers = std::clamp<Index>(par.threads, 1, std::max<Index>(n, 1));
  if (workers <= 1 || n < 64) {
    fn(Index{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index begin = w * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace tricluster::detail
