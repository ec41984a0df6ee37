#pragma once

#include <span>
#include <string>
#include <vector>

#include "tricluster/common.hpp"

namespace tricluster {

struct Label {
  std::string id;
  int cls = 0;

  friend bool operator==(const Label&, const Label&) = default;
};

// Entity ids with a class index each. Ids are unique.
struct LabelVector {
  std::vector<Label> entries;

  std::size_t size() const { return entries.size(); }
  void validate() const;
  // Copy restricted to the given ids, in their order. Throws if one is missing.
  LabelVector restricted_to(std::span<const std::string> ids) const;
  std::vector<std::string> ids() const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

struct ClusterAssignment {
  LabelVector labels;
  std::vector<double> scores;   // winning share of the row mass, 0 for zero rows
  std::vector<bool> zero_rows;  // rows with no mass, assigned class 0
};

// Row-wise argmax, ties to the lowest index.
ClusterAssignment assign_clusters(const DenseMatrix& s, std::span<const std::string> ids);

// (1/n) sum over predicted clusters of the largest overlap with a true class.
double clustering_accuracy(const LabelVector& pred, const LabelVector& truth);

// 2 I(C;G) / (H(C) + H(G)), natural log; 0 when both entropies vanish.
double nmi(const LabelVector& pred, const LabelVector& truth);

}  // namespace tricluster
