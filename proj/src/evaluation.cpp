#include "tricluster/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace tricluster {

void LabelVector::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (e.cls < 0) throw InputError(fmt::format("label for '{}' has negative class {}", e.id, e.cls));
    if (!seen.insert(e.id).second) throw InputError(fmt::format("duplicate label id '{}'", e.id));
  }
}

LabelVector LabelVector::restricted_to(std::span<const std::string> ids) const {
  std::unordered_map<std::string, int> by_id;
  for (const auto& e : entries) by_id.emplace(e.id, e.cls);
  LabelVector out;
  out.entries.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError(fmt::format("no label for id '{}'", id));
    out.entries.push_back({id, it->second});
  }
  return out;
}

std::vector<std::string> LabelVector::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

ClusterAssignment assign_clusters(const DenseMatrix& s, std::span<const std::string> ids) {
  if (static_cast<Index>(ids.size()) != s.rows()) {
    throw InputError(fmt::format("assign_clusters: {} ids for {} rows", ids.size(), s.rows()));
  }
  ClusterAssignment out;
  out.labels.entries.reserve(ids.size());
  for (Index i = 0; i < s.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < s.cols(); ++j)
      if (s(i, j) > s(i, best)) best = static_cast<int>(j);
    const double total = s.row(i).sum();
    const bool zero = !(total > 0.0);
    out.labels.entries.push_back({ids[static_cast<std::size_t>(i)], best});
    out.scores.push_back(zero ? 0.0 : s(i, best) / total);
    out.zero_rows.push_back(zero);
  }
  return out;
}

namespace {

// Contingency table with rows/columns ordered by first appearance when
// entities are visited in id order, so relabeling either side leaves the
// summation order unchanged.
struct Contingency {
  std::vector<std::vector<double>> cells;  // [pred cluster][true class]
  std::vector<double> pred_sizes;
  std::vector<double> true_sizes;
  double n = 0.0;
};

Contingency contingency(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) {
    throw InputError(fmt::format("label sets differ in size: {} predicted vs {} true",
                                 pred.size(), truth.size()));
  }
  if (pred.size() == 0) throw InputError("cannot score an empty labeling");
  std::unordered_map<std::string, int> truth_by_id;
  for (const auto& e : truth.entries) {
    if (!truth_by_id.emplace(e.id, e.cls).second) {
      throw InputError(fmt::format("duplicate true label id '{}'", e.id));
    }
  }
  std::vector<std::pair<std::string_view, std::pair<int, int>>> rows;
  rows.reserve(pred.size());
  for (const auto& e : pred.entries) {
    const auto it = truth_by_id.find(e.id);
    if (it == truth_by_id.end()) {
      throw InputError(fmt::format("predicted id '{}' has no true label", e.id));
    }
    rows.push_back({e.id, {e.cls, it->second}});
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].first == rows[i - 1].first) {
      throw InputError(fmt::format("duplicate predicted id '{}'", rows[i].first));
    }
  }

  std::unordered_map<int, std::size_t> pred_slot, true_slot;
  Contingency c;
  for (const auto& [id, labels] : rows) {
    auto [pi, p_new] = pred_slot.emplace(labels.first, pred_slot.size());
    auto [ti, t_new] = true_slot.emplace(labels.second, true_slot.size());
    if (p_new) {
      c.cells.emplace_back();
      c.pred_sizes.push_back(0.0);
    }
    if (t_new) c.true_sizes.push_back(0.0);
    for (auto& row : c.cells) row.resize(c.true_sizes.size(), 0.0);
    c.cells[pi->second][ti->second] += 1.0;
    c.pred_sizes[pi->second] += 1.0;
    c.true_sizes[ti->second] += 1.0;
  }
  c.n = static_cast<double>(rows.size());
  return c;
}

double entropy(const std::vector<double>& sizes, double n) {
  double h = 0.0;
  for (double s : sizes)
    if (s > 0.0) h -= (s / n) * std::log(s / n);
  return h;
}

}  // namespace

double clustering_accuracy(const LabelVector& pred, const LabelVector& truth) {
  const Contingency c = contingency(pred, truth);
  double hits = 0.0;
  for (const auto& row : c.cells) hits += *std::max_element(row.begin(), row.end());
  return std::clamp(hits / c.n, 0.0, 1.0);
}

double nmi(const LabelVector& pred, const LabelVector& truth) {
  const Contingency c = contingency(pred, truth);
  double mutual = 0.0;
  for (std::size_t i = 0; i < c.cells.size(); ++i) {
    for (std::size_t j = 0; j < c.cells[i].size(); ++j) {
      const double nij = c.cells[i][j];
      if (nij > 0.0) mutual += (nij / c.n) * std::log(c.n * nij / (c.pred_sizes[i] * c.true_sizes[j]));
    }
  }
  const double denom = entropy(c.pred_sizes, c.n) + entropy(c.true_sizes, c.n);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(2.0 * mutual / denom, 0.0, 1.0);
}

}  // namespace tricluster
