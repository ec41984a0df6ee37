#pragma once

#include <cstdint>
#include <vector>

#include "tricluster/batch.hpp"

namespace tricluster {

// Planted-partition stream. Features are split into k contiguous blocks; each
// tweet and user draws its feature counts from its own class block with
// probability `separation`, uniformly otherwise, plus Poisson(noise) counts on
// every cell.
struct SynthSpec {
  Index tweets = 600;   // per timestamp
  Index users = 150;    // population size per timestamp
  Index features = 90;
  int clusters = 3;
  double separation = 0.9;
  double noise = 0.05;
  int timestamps = 1;
  double churn = 0.0;  // share of users replaced by fresh ones each step
  double drift = 0.0;  // share of users whose class flips each step
  std::uint64_t seed = 1;

  // Shape of each entity's data; not exposed on the command line.
  int words_per_tweet = 8;
  int words_per_user = 16;
  double graph_degree = 4.0;  // expected same-class neighbours at separation 1
  double lexicon_share = 0.3; // share of each block marked in the prior

  void validate() const;
};

std::vector<BatchData> synth_generate(const SynthSpec& spec);

}  // namespace tricluster
