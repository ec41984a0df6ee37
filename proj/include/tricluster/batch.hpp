#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tricluster/evaluation.hpp"
#include "tricluster/offline_solver.hpp"

namespace tricluster {

// One timestamp of a stream: the bundle restricted to this batch's tweets and
// users, plus the row -> global id maps. The feature space is global.
struct BatchData {
  std::int64_t timestamp = 0;
  DataBundle bundle;
  std::vector<std::string> tweet_ids;
  std::vector<std::string> user_ids;
  std::vector<std::string> feature_ids;
  std::optional<LabelVector> tweet_truth;
  std::optional<LabelVector> user_truth;

  // Checks id maps against the bundle shapes and user id uniqueness.
  void validate() const;
};

// Union of batches: one row per global user (entries summed across batches),
// tweets stacked in arrival order. Truth labels come from the latest batch
// for users and from every batch for tweets.
BatchData concatenate_batches(std::span<const BatchData> batches);

}  // namespace tricluster
