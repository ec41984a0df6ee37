#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "tricluster/common.hpp"
#include "tricluster/kernels.hpp"
#include "tricluster/sparse_matrix.hpp"

namespace tricluster {

// One self-consistent snapshot of the tripartite graph:
//   tweet_features  n x l   tweet-feature counts
//   user_features   m x l   user-feature counts
//   user_tweets     m x n   user-tweet (authoring / retweet) links
//   user_graph      m x m   user-user retweet graph, as D and G
//   lexicon_prior   l x k   per-feature sentiment prior, rows may be zero
struct DataBundle {
  SparseMatrix tweet_features;
  SparseMatrix user_features;
  SparseMatrix user_tweets;
  GraphLaplacian user_graph;
  DenseMatrix lexicon_prior;

  // Validates all shapes against each other. `user_graph` may be any
  // symmetric non-negative m x m matrix; it is split into D and G here.
  static DataBundle make(SparseMatrix tweet_features, SparseMatrix user_features,
                         SparseMatrix user_tweets, const SparseMatrix& user_graph,
                         DenseMatrix lexicon_prior);

  Index n() const { return tweet_features.rows(); }
  Index m() const { return user_features.rows(); }
  Index l() const { return tweet_features.cols(); }
  Index k() const { return lexicon_prior.cols(); }
};

struct FactorState {
  DenseMatrix features;     // l x k
  DenseMatrix tweets;       // n x k
  DenseMatrix users;        // m x k
  DenseMatrix tweet_assoc;  // k x k, tweet clusters to feature clusters
  DenseMatrix user_assoc;   // k x k, user clusters to feature clusters

  bool all_finite_nonnegative() const;
  double min_entry() const;

  friend bool operator==(const FactorState&, const FactorState&) = default;
};

struct SolverConfig {
  double alpha = 0.05;  // lexicon prior weight
  double beta = 0.8;    // user graph weight
  int k = 3;
  int max_iters = 200;
  double tol = 1e-6;
  double eps = 1e-12;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  Parallelism parallelism() const { return {threads}; }
};

struct ObjectiveTrace {
  std::vector<double> values;  // initial objective, then one per sweep
  bool converged = false;
  int iterations = 0;
};

struct FitResult {
  FactorState state;
  ObjectiveTrace trace;
};

// Numerator and denominator of a multiplicative update M <- M o sqrt(numer/denom).
struct UpdateTerms {
  DenseMatrix numer;
  DenseMatrix denom;
};

// The update-rule templates, written against raw matrices so the streaming
// solver can apply them to per-timestamp data and other prior targets.
namespace rules {

// S_f rule, pulled toward `target` (lexicon prior offline, decayed window online).
UpdateTerms feature_terms(const FactorState& s, const SparseMatrix& tweet_features,
                          const SparseMatrix& user_features, const DenseMatrix& target,
                          double alpha, Parallelism par);

// S_p rule.
UpdateTerms tweet_terms(const FactorState& s, const SparseMatrix& tweet_features,
                        const SparseMatrix& user_tweets, Parallelism par);

// Pieces of the S_u rule before the orthogonality multiplier is split.
struct UserTermParts {
  DenseMatrix gain;   // X_u S_f H_u^T + X_r S_p + beta G S_u
  DenseMatrix cost;   // S_u H_u S_f^T S_f H_u^T + S_u S_p^T S_p + beta D S_u
  DenseMatrix delta;  // k x k multiplier for S_u^T S_u = I
};
UserTermParts user_parts(const FactorState& s, const SparseMatrix& user_features,
                         const SparseMatrix& user_tweets, const GraphLaplacian& graph,
                         double beta, Parallelism par);
UpdateTerms user_terms(const FactorState& s, const UserTermParts& parts);

// H rule: S^T X S_f / (S^T S H S_f^T S_f).
UpdateTerms assoc_terms(const DenseMatrix& rows, const SparseMatrix& data,
                        const DenseMatrix& features, const DenseMatrix& assoc, Parallelism par);

}  // namespace rules

void validate_shapes(const FactorState& state, const DataBundle& bundle);

FactorState init_factors(const DataBundle& bundle, const SolverConfig& config);

double objective(const FactorState& state, const DataBundle& bundle, const SolverConfig& config);

DenseMatrix update_features(const FactorState& state, const DataBundle& bundle,
                            const SolverConfig& config);
DenseMatrix update_tweets(const FactorState& state, const DataBundle& bundle,
                          const SolverConfig& config);
DenseMatrix update_users(const FactorState& state, const DataBundle& bundle,
                         const SolverConfig& config);
DenseMatrix update_tweet_assoc(const FactorState& state, const DataBundle& bundle,
                               const SolverConfig& config);
DenseMatrix update_user_assoc(const FactorState& state, const DataBundle& bundle,
                              const SolverConfig& config);

// Called after each individual factor update with the factor's name.
using UpdateObserver = std::function<void(std::string_view factor, const FactorState&)>;

// One pass in the order S_p, H_p, S_u, H_u, S_f, each update seeing the
// freshest values of the others.
void offline_sweep(FactorState& state, const DataBundle& bundle, const SolverConfig& config,
                   const UpdateObserver& observer = {});

FitResult fit_offline(const DataBundle& bundle, const SolverConfig& config);
FitResult fit_offline(const DataBundle& bundle, const SolverConfig& config, FactorState initial);

// Normalized KKT violation: sum |(denom - numer) o M| over all five factors,
// divided by sum (denom + numer) o M. Zero at a stationary point.
double kkt_residual(const FactorState& state, const DataBundle& bundle, const SolverConfig& config);

// Shared convergence test: |J_t - J_{t-1}| / (1 + J_{t-1}) < tol.
bool converged(double previous, double current, double tol);

}  // namespace tricluster
