#include "tricluster/offline_solver.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tricluster/random.hpp"

namespace tricluster {

DataBundle DataBundle::make(SparseMatrix tweet_features, SparseMatrix user_features,
                            SparseMatrix user_tweets, const SparseMatrix& user_graph,
                            DenseMatrix lexicon_prior) {
  const Index n = tweet_features.rows();
  const Index l = tweet_features.cols();
  const Index m = user_features.rows();
  if (user_features.cols() != l) {
    throw InputError(fmt::format("user-feature matrix {} and tweet-feature matrix {} disagree on "
                                 "the feature count",
                                 shape_of(user_features), shape_of(tweet_features)));
  }
  if (user_tweets.rows() != m || user_tweets.cols() != n) {
    throw InputError(fmt::format("user-tweet matrix is {} but expected {} from the user-feature "
                                 "matrix {} and tweet-feature matrix {}",
                                 shape_of(user_tweets), shape_str(m, n), shape_of(user_features),
                                 shape_of(tweet_features)));
  }
  if (user_graph.rows() != m || user_graph.cols() != m) {
    throw InputError(fmt::format("user graph is {} but there are {} users", shape_of(user_graph),
                                 m));
  }
  if (lexicon_prior.rows() != l || lexicon_prior.cols() < 1) {
    throw InputError(fmt::format("lexicon prior is {} but expected {} feature rows",
                                 shape_of(lexicon_prior), l));
  }
  if (!lexicon_prior.allFinite() || lexicon_prior.minCoeff() < 0.0 ||
      lexicon_prior.maxCoeff() > 1.0) {
    throw InputError("lexicon prior entries must lie in [0, 1]");
  }
  return DataBundle{std::move(tweet_features), std::move(user_features), std::move(user_tweets),
                    laplacian_parts(user_graph), std::move(lexicon_prior)};
}

bool FactorState::all_finite_nonnegative() const {
  for (const DenseMatrix* f : {&features, &tweets, &users, &tweet_assoc, &user_assoc}) {
    if (f->size() == 0) continue;
    if (!f->allFinite() || f->minCoeff() < 0.0) return false;
  }
  return true;
}

double FactorState::min_entry() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const DenseMatrix* f : {&features, &tweets, &users, &tweet_assoc, &user_assoc})
    if (f->size() > 0) lo = std::min(lo, f->minCoeff());
  return lo;
}

void SolverConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError(fmt::format("alpha {} not in [0, 1]", alpha));
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError(fmt::format("beta {} not in [0, 1]", beta));
  if (k < 2) throw InputError(fmt::format("need at least 2 clusters, got {}", k));
  if (max_iters < 1) throw InputError("max_iters must be at least 1");
  if (!(tol > 0.0)) throw InputError("tol must be positive");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (threads < 1) throw InputError("threads must be at least 1");
}

namespace rules {

UpdateTerms feature_terms(const FactorState& s, const SparseMatrix& tweet_features,
                          const SparseMatrix& user_features, const DenseMatrix& target,
                          double alpha, Parallelism par) {
  const DenseMatrix& sf = s.features;
  const DenseMatrix from_users = spmm_t(user_features, s.users * s.user_assoc, par);
  const DenseMatrix from_tweets = spmm_t(tweet_features, s.tweets * s.tweet_assoc, par);
  const DenseMatrix user_curv = s.user_assoc.transpose() * gram(s.users) * s.user_assoc;
  const DenseMatrix tweet_curv = s.tweet_assoc.transpose() * gram(s.tweets) * s.tweet_assoc;

  const DenseMatrix delta = sf.transpose() * from_users - user_curv +
                            sf.transpose() * from_tweets - tweet_curv -
                            alpha * sf.transpose() * (sf - target);
  const SignSplit d = split_pos_neg(delta);

  return {from_users + from_tweets + alpha * target + sf * d.minus,
          sf * user_curv + sf * tweet_curv + alpha * sf + sf * d.plus};
}

UpdateTerms tweet_terms(const FactorState& s, const SparseMatrix& tweet_features,
                        const SparseMatrix& user_tweets, Parallelism par) {
  const DenseMatrix& sp = s.tweets;
  const DenseMatrix from_features =
      spmm(tweet_features, s.features * s.tweet_assoc.transpose(), par);
  const DenseMatrix from_users = spmm_t(user_tweets, s.users, par);
  const DenseMatrix feature_curv = s.tweet_assoc * gram(s.features) * s.tweet_assoc.transpose();
  const DenseMatrix user_curv = gram(s.users);

  const DenseMatrix delta =
      sp.transpose() * from_features - feature_curv + sp.transpose() * from_users - user_curv;
  const SignSplit d = split_pos_neg(delta);

  return {from_features + from_users + sp * d.minus,
          sp * feature_curv + sp * user_curv + sp * d.plus};
}

UserTermParts user_parts(const FactorState& s, const SparseMatrix& user_features,
                         const SparseMatrix& user_tweets, const GraphLaplacian& graph,
                         double beta, Parallelism par) {
  const DenseMatrix& su = s.users;
  const DenseMatrix from_features = spmm(user_features, s.features * s.user_assoc.transpose(), par);
  const DenseMatrix from_tweets = spmm(user_tweets, s.tweets, par);
  const DenseMatrix neighbours = adjacency_times(graph, su, par);
  const DenseMatrix degrees = degree_times(graph, su);
  const DenseMatrix feature_curv = s.user_assoc * gram(s.features) * s.user_assoc.transpose();
  const DenseMatrix tweet_curv = gram(s.tweets);

  UserTermParts parts;
  parts.gain = from_features + from_tweets + beta * neighbours;
  parts.cost = su * feature_curv + su * tweet_curv + beta * degrees;
  parts.delta = su.transpose() * from_features + su.transpose() * from_tweets - feature_curv -
                tweet_curv - beta * (su.transpose() * (degrees - neighbours));
  return parts;
}

UpdateTerms user_terms(const FactorState& s, const UserTermParts& parts) {
  const SignSplit d = split_pos_neg(parts.delta);
  return {parts.gain + s.users * d.minus, parts.cost + s.users * d.plus};
}

UpdateTerms assoc_terms(const DenseMatrix& rows, const SparseMatrix& data,
                        const DenseMatrix& features, const DenseMatrix& assoc, Parallelism par) {
  return {rows.transpose() * spmm(data, features, par), gram(rows) * assoc * gram(features)};
}

}  // namespace rules

void validate_shapes(const FactorState& s, const DataBundle& b) {
  const Index k = b.k();
  auto check = [](const char* name, const DenseMatrix& m, Index rows, Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
      throw InputError(fmt::format("factor {} is {} but the data requires {}", name, shape_of(m),
                                   shape_str(rows, cols)));
    }
  };
  check("S_f", s.features, b.l(), k);
  check("S_p", s.tweets, b.n(), k);
  check("S_u", s.users, b.m(), k);
  check("H_p", s.tweet_assoc, k, k);
  check("H_u", s.user_assoc, k, k);
}

namespace {

constexpr double kInitLow = 0.01;
constexpr double kInitHigh = 1.0;

DenseMatrix random_block(Rng& rng, Index rows, Index cols) {
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(kInitLow, kInitHigh);
  return m;
}

void check_k(const DataBundle& bundle, const SolverConfig& config) {
  config.validate();
  if (bundle.k() != config.k) {
    throw InputError(fmt::format("lexicon prior has {} classes but {} clusters were requested",
                                 bundle.k(), config.k));
  }
}

}  // namespace

FactorState init_factors(const DataBundle& bundle, const SolverConfig& config) {
  check_k(bundle, config);
  const Index k = config.k;
  Rng rng(config.seed);
  FactorState s;
  s.tweets = random_block(rng, bundle.n(), k);
  s.users = random_block(rng, bundle.m(), k);
  s.features = random_block(rng, bundle.l(), k);
  s.tweet_assoc = random_block(rng, k, k);
  s.user_assoc = random_block(rng, k, k);
  for (Index i = 0; i < bundle.l(); ++i) {
    if (bundle.lexicon_prior.row(i).maxCoeff() > 0.0) {
      s.features.row(i) = 0.5 * bundle.lexicon_prior.row(i) + 0.5 * s.features.row(i);
    }
  }
  return s;
}

double objective(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  validate_shapes(s, b);
  const Parallelism par = c.parallelism();
  return frob_residual_sq(b.tweet_features, s.tweets, s.tweet_assoc, s.features, par) +
         frob_residual_sq(b.user_features, s.users, s.user_assoc, s.features, par) +
         frob_residual_sq(b.user_tweets, s.users, std::nullopt, s.tweets, par) +
         c.alpha * (s.features - b.lexicon_prior).squaredNorm() +
         c.beta * trace_quadratic(s.users, b.user_graph);
}

DenseMatrix update_features(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  const auto t = rules::feature_terms(s, b.tweet_features, b.user_features, b.lexicon_prior,
                                      c.alpha, c.parallelism());
  return hadamard_sqrt_update(s.features, t.numer, t.denom, c.eps);
}

DenseMatrix update_tweets(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  const auto t = rules::tweet_terms(s, b.tweet_features, b.user_tweets, c.parallelism());
  return hadamard_sqrt_update(s.tweets, t.numer, t.denom, c.eps);
}

DenseMatrix update_users(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  const auto parts =
      rules::user_parts(s, b.user_features, b.user_tweets, b.user_graph, c.beta, c.parallelism());
  const auto t = rules::user_terms(s, parts);
  return hadamard_sqrt_update(s.users, t.numer, t.denom, c.eps);
}

DenseMatrix update_tweet_assoc(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  const auto t =
      rules::assoc_terms(s.tweets, b.tweet_features, s.features, s.tweet_assoc, c.parallelism());
  return hadamard_sqrt_update(s.tweet_assoc, t.numer, t.denom, c.eps);
}

DenseMatrix update_user_assoc(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  const auto t =
      rules::assoc_terms(s.users, b.user_features, s.features, s.user_assoc, c.parallelism());
  return hadamard_sqrt_update(s.user_assoc, t.numer, t.denom, c.eps);
}

void offline_sweep(FactorState& s, const DataBundle& b, const SolverConfig& c,
                   const UpdateObserver& observer) {
  auto notify = [&](std::string_view name) {
    if (observer) observer(name, s);
  };
  s.tweets = update_tweets(s, b, c);
  notify("S_p");
  s.tweet_assoc = update_tweet_assoc(s, b, c);
  notify("H_p");
  s.users = update_users(s, b, c);
  notify("S_u");
  s.user_assoc = update_user_assoc(s, b, c);
  notify("H_u");
  s.features = update_features(s, b, c);
  notify("S_f");
}

bool converged(double previous, double current, double tol) {
  return std::abs(current - previous) / (1.0 + previous) < tol;
}

FitResult fit_offline(const DataBundle& bundle, const SolverConfig& config) {
  return fit_offline(bundle, config, init_factors(bundle, config));
}

FitResult fit_offline(const DataBundle& bundle, const SolverConfig& config, FactorState initial) {
  check_k(bundle, config);
  validate_shapes(initial, bundle);
  FitResult result{std::move(initial), {}};
  ObjectiveTrace& trace = result.trace;
  double previous = objective(result.state, bundle, config);
  if (!std::isfinite(previous)) throw NumericError("non-finite objective at the initial state");
  trace.values.push_back(previous);

  for (int sweep = 1; sweep <= config.max_iters; ++sweep) {
    offline_sweep(result.state, bundle, config);
    const double current = objective(result.state, bundle, config);
    if (!std::isfinite(current)) {
      throw NumericError(fmt::format("non-finite objective after sweep {}", sweep));
    }
    trace.values.push_back(current);
    trace.iterations = sweep;
    if (converged(previous, current, config.tol)) {
      trace.converged = true;
      break;
    }
    previous = current;
  }
  return result;
}

namespace {

struct KktAccumulator {
  double violation = 0.0;
  double scale = 0.0;

  void add(const DenseMatrix& m, const UpdateTerms& t) {
    violation += (t.denom - t.numer).cwiseAbs().cwiseProduct(m).sum();
    scale += (t.denom + t.numer).cwiseProduct(m).sum();
  }
  double value() const { return scale > 0.0 ? violation / scale : 0.0; }
};

}  // namespace

double kkt_residual(const FactorState& s, const DataBundle& b, const SolverConfig& c) {
  validate_shapes(s, b);
  const Parallelism par = c.parallelism();
  KktAccumulator acc;
  acc.add(s.features,
          rules::feature_terms(s, b.tweet_features, b.user_features, b.lexicon_prior, c.alpha, par));
  acc.add(s.tweets, rules::tweet_terms(s, b.tweet_features, b.user_tweets, par));
  acc.add(s.users, rules::user_terms(s, rules::user_parts(s, b.user_features, b.user_tweets,
                                                          b.user_graph, c.beta, par)));
  acc.add(s.tweet_assoc, rules::assoc_terms(s.tweets, b.tweet_features, s.features, s.tweet_assoc, par));
  acc.add(s.user_assoc, rules::assoc_terms(s.users, b.user_features, s.features, s.user_assoc, par));
  return acc.value();
}

}  // namespace tricluster
