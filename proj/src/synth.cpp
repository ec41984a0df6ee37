#include "tricluster/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tricluster/random.hpp"

namespace tricluster {

void SynthSpec::validate() const {
  if (clusters < 2) throw InputError("synth: need at least 2 clusters");
  if (features < clusters) {
    throw InputError(fmt::format("synth: {} clusters cannot be planted in {} features", clusters,
                                 features));
  }
  if (tweets < 1 || users < 1) throw InputError("synth: need at least one tweet and one user");
  if (!(separation >= 0.0 && separation <= 1.0)) throw InputError("synth: separation not in [0, 1]");
  if (!(noise >= 0.0)) throw InputError("synth: noise must be non-negative");
  if (timestamps < 1) throw InputError("synth: need at least one timestamp");
  if (!(churn >= 0.0 && churn < 1.0)) throw InputError("synth: churn not in [0, 1)");
  if (!(drift >= 0.0 && drift < 1.0)) throw InputError("synth: drift not in [0, 1)");
  if (words_per_tweet < 1 || words_per_user < 1) throw InputError("synth: word counts must be positive");
}

namespace {

struct PlantedUser {
  std::string id;
  int cls;
};

std::string user_id(std::int64_t serial) { return fmt::format("u{:06}", serial); }
std::string tweet_id(std::int64_t serial) { return fmt::format("p{:07}", serial); }

class Planter {
 public:
  Planter(const SynthSpec& spec) : spec_(spec), l_(spec.features), k_(spec.clusters) {}

  Index block_begin(int cls) const { return static_cast<Index>(cls) * l_ / k_; }
  Index block_end(int cls) const { return static_cast<Index>(cls + 1) * l_ / k_; }

  // `words` draws from the class block w.p. separation, uniform otherwise.
  void draw_row(Rng& rng, Index row, int cls, int words, std::vector<double>& dense) const {
    for (int w = 0; w < words; ++w) {
      Index f;
      if (rng.bernoulli(spec_.separation)) {
        const Index lo = block_begin(cls), hi = block_end(cls);
        f = lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo)));
      } else {
        f = static_cast<Index>(rng.below(static_cast<std::uint64_t>(l_)));
      }
      dense[static_cast<std::size_t>(row * l_ + f)] += 1.0;
    }
    if (spec_.noise > 0.0) {
      for (Index f = 0; f < l_; ++f)
        dense[static_cast<std::size_t>(row * l_ + f)] += rng.poisson(spec_.noise);
    }
  }

  SparseMatrix to_sparse(const std::vector<double>& dense, Index rows) const {
    std::vector<Triplet> trips;
    for (Index i = 0; i < rows; ++i)
      for (Index f = 0; f < l_; ++f)
        if (const double v = dense[static_cast<std::size_t>(i * l_ + f)]; v > 0.0)
          trips.push_back({i, f, v});
    return SparseMatrix(rows, l_, trips);
  }

  DenseMatrix lexicon() const {
    DenseMatrix prior = DenseMatrix::Zero(l_, k_);
    for (int c = 0; c < k_; ++c) {
      const Index size = block_end(c) - block_begin(c);
      const auto marked = static_cast<Index>(std::ceil(spec_.lexicon_share * static_cast<double>(size)));
      for (Index f = block_begin(c); f < block_begin(c) + std::min(marked, size); ++f) prior(f, c) = 1.0;
    }
    return prior;
  }

 private:
  const SynthSpec& spec_;
  Index l_;
  int k_;
};

// Picks `count` distinct positions from [0, n).
std::vector<std::size_t> pick(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < std::min(count, n); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(std::min(count, n));
  return order;
}

}  // namespace

std::vector<BatchData> synth_generate(const SynthSpec& spec) {
  spec.validate();
  const Planter planter(spec);
  const int k = spec.clusters;
  const Index l = spec.features;
  const Index m = spec.users;
  const Index n = spec.tweets;

  std::vector<std::string> feature_ids;
  for (Index f = 0; f < l; ++f) feature_ids.push_back(fmt::format("f{:05}", f));
  const DenseMatrix prior = planter.lexicon();

  Rng population_rng(spec.seed, 1);
  std::int64_t next_user = 0;
  std::int64_t next_tweet = 0;
  std::vector<PlantedUser> population;
  for (Index i = 0; i < m; ++i) population.push_back({user_id(next_user++), static_cast<int>(i % k)});

  std::vector<BatchData> batches;
  for (int t = 0; t < spec.timestamps; ++t) {
    if (t > 0) {
      const auto churned = static_cast<std::size_t>(std::floor(spec.churn * static_cast<double>(m)));
      for (std::size_t slot : pick(population_rng, population.size(), churned)) {
        population[slot] = {user_id(next_user++),
                            static_cast<int>(population_rng.below(static_cast<std::uint64_t>(k)))};
      }
      const auto drifted = static_cast<std::size_t>(std::floor(spec.drift * static_cast<double>(m)));
      for (std::size_t slot : pick(population_rng, population.size(), drifted)) {
        const int shift = 1 + static_cast<int>(population_rng.below(static_cast<std::uint64_t>(k - 1)));
        population[slot].cls = (population[slot].cls + shift) % k;
      }
    }

    Rng rng(spec.seed, 100 + static_cast<std::uint64_t>(t));

    // Authors: a shuffled pass over the population, repeated, so every user
    // writes at least one tweet when n >= m.
    std::vector<std::size_t> authors;
    while (static_cast<Index>(authors.size()) < n) {
      auto round = pick(rng, population.size(), population.size());
      authors.insert(authors.end(), round.begin(), round.end());
    }
    authors.resize(static_cast<std::size_t>(n));

    std::vector<double> tweet_dense(static_cast<std::size_t>(n * l), 0.0);
    std::vector<Triplet> links;
    LabelVector tweet_truth;
    std::vector<std::string> tweet_ids;
    for (Index i = 0; i < n; ++i) {
      const PlantedUser& author = population[authors[static_cast<std::size_t>(i)]];
      planter.draw_row(rng, i, author.cls, spec.words_per_tweet, tweet_dense);
      links.push_back({static_cast<Index>(authors[static_cast<std::size_t>(i)]), i, 1.0});
      tweet_ids.push_back(tweet_id(next_tweet++));
      tweet_truth.entries.push_back({tweet_ids.back(), author.cls});
    }

    std::vector<double> user_dense(static_cast<std::size_t>(m * l), 0.0);
    LabelVector user_truth;
    std::vector<std::string> user_ids;
    for (Index u = 0; u < m; ++u) {
      const PlantedUser& user = population[static_cast<std::size_t>(u)];
      planter.draw_row(rng, u, user.cls, spec.words_per_user, user_dense);
      user_ids.push_back(user.id);
      user_truth.entries.push_back({user.id, user.cls});
    }

    // Edge probability degree/m, scaled by k on same-class pairs in
    // proportion to the separation; uniform at separation 0.
    std::vector<Triplet> edges;
    const double base = spec.graph_degree / static_cast<double>(m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = i + 1; j < m; ++j) {
        const bool same = population[static_cast<std::size_t>(i)].cls == population[static_cast<std::size_t>(j)].cls;
        const double p = std::min(
            1.0, base * (spec.separation * (same ? k : 0) + (1.0 - spec.separation)));
        if (rng.bernoulli(p)) {
          edges.push_back({i, j, 1.0});
          edges.push_back({j, i, 1.0});
        }
      }
    }

    BatchData batch{
        t + 1,
        DataBundle::make(planter.to_sparse(tweet_dense, n), planter.to_sparse(user_dense, m),
                         SparseMatrix(m, n, links), SparseMatrix(m, m, edges), prior),
        std::move(tweet_ids),
        std::move(user_ids),
        feature_ids,
        std::move(tweet_truth),
        std::move(user_truth)};
    batch.validate();
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace tricluster
