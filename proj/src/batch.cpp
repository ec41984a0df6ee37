#include "tricluster/batch.hpp"

#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace tricluster {

void BatchData::validate() const {
  auto check = [&](const char* what, std::size_t ids, Index rows) {
    if (static_cast<Index>(ids) != rows) {
      throw InputError(fmt::format("batch {}: {} {} ids for {} matrix rows", timestamp, ids, what,
                                   rows));
    }
  };
  check("tweet", tweet_ids.size(), bundle.n());
  check("user", user_ids.size(), bundle.m());
  check("feature", feature_ids.size(), bundle.l());
  std::unordered_set<std::string_view> seen;
  for (const auto& id : user_ids) {
    if (!seen.insert(id).second) {
      throw InputError(fmt::format("batch {}: user '{}' appears more than once", timestamp, id));
    }
  }
  if (tweet_truth) tweet_truth->validate();
  if (user_truth) user_truth->validate();
}

BatchData concatenate_batches(std::span<const BatchData> batches) {
  if (batches.empty()) throw InputError("cannot concatenate an empty batch list");
  const BatchData& last = batches.back();
  const Index l = last.bundle.l();

  std::vector<std::string> users;
  std::unordered_map<std::string, Index> user_row;
  std::vector<std::string> tweets;
  for (const auto& b : batches) {
    if (b.feature_ids != last.feature_ids) {
      throw InputError(fmt::format("batch {} uses a different feature space than batch {}",
                                   b.timestamp, last.timestamp));
    }
    for (const auto& id : b.user_ids)
      if (user_row.emplace(id, static_cast<Index>(users.size())).second) users.push_back(id);
    tweets.insert(tweets.end(), b.tweet_ids.begin(), b.tweet_ids.end());
  }

  std::vector<Triplet> xp, xu, xr, gu;
  Index tweet_offset = 0;
  bool have_truth = true;
  std::unordered_map<std::string, int> user_label;
  LabelVector tweet_truth;
  for (const auto& b : batches) {
    std::vector<Index> rows;
    rows.reserve(b.user_ids.size());
    for (const auto& id : b.user_ids) rows.push_back(user_row.at(id));
    for (auto e : b.bundle.tweet_features.entries()) xp.push_back({e.row + tweet_offset, e.col, e.value});
    for (auto e : b.bundle.user_features.entries()) xu.push_back({rows[e.row], e.col, e.value});
    for (auto e : b.bundle.user_tweets.entries()) xr.push_back({rows[e.row], e.col + tweet_offset, e.value});
    for (auto e : b.bundle.user_graph.adjacency.entries()) gu.push_back({rows[e.row], rows[e.col], e.value});
    tweet_offset += b.bundle.n();

    have_truth = have_truth && b.tweet_truth && b.user_truth;
    if (have_truth) {
      tweet_truth.entries.insert(tweet_truth.entries.end(), b.tweet_truth->entries.begin(),
                                 b.tweet_truth->entries.end());
      for (const auto& e : b.user_truth->entries) user_label[e.id] = e.cls;
    }
  }

  const auto n = static_cast<Index>(tweets.size());
  const auto m = static_cast<Index>(users.size());
  BatchData out{
      last.timestamp,
      DataBundle::make(SparseMatrix(n, l, xp), SparseMatrix(m, l, xu), SparseMatrix(m, n, xr),
                       SparseMatrix(m, m, gu), last.bundle.lexicon_prior),
      std::move(tweets),
      users,
      last.feature_ids,
      std::nullopt,
      std::nullopt};
  if (have_truth) {
    LabelVector user_truth;
    for (const auto& id : users)
      if (const auto it = user_label.find(id); it != user_label.end())
        user_truth.entries.push_back({id, it->second});
    out.tweet_truth = std::move(tweet_truth);
    out.user_truth = std::move(user_truth);
  }
  return out;
}

}  // namespace tricluster
