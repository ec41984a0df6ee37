#include "tricluster/online_solver.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "tricluster/random.hpp"

namespace tricluster {

std::string_view to_string(StreamMode mode) {
  switch (mode) {
    case StreamMode::online: return "online";
    case StreamMode::mini_batch: return "mini-batch";
    case StreamMode::full_batch: return "full-batch";
  }
  return "online";
}

StreamMode parse_stream_mode(std::string_view text) {
  if (text == "online") return StreamMode::online;
  if (text == "mini-batch") return StreamMode::mini_batch;
  if (text == "full-batch") return StreamMode::full_batch;
  throw InputError(fmt::format("unknown stream mode '{}'", text));
}

void StreamConfig::validate() const {
  solver.validate();
  if (!(gamma >= 0.0)) throw InputError(fmt::format("gamma {} must be non-negative", gamma));
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError(fmt::format("tau {} not in (0, 1]", tau));
  if (window < 2) throw InputError(fmt::format("window {} must be at least 2", window));
}

TemporalState::TemporalState(double tau, int window) : tau_(tau), window_(window) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError(fmt::format("tau {} not in (0, 1]", tau));
  if (window < 2) throw InputError(fmt::format("window {} must be at least 2", window));
}

std::vector<std::string> TemporalState::registry() const {
  return buffer_.empty() ? std::vector<std::string>{} : buffer_.front().user_ids;
}

void TemporalState::push(Snapshot snapshot) {
  if (!buffer_.empty() && snapshot.timestamp <= buffer_.front().timestamp) {
    throw InputError(fmt::format("snapshot {} does not follow {}", snapshot.timestamp,
                                 buffer_.front().timestamp));
  }
  buffer_.push_front(std::move(snapshot));
  while (static_cast<int>(buffer_.size()) > window_ - 1) buffer_.pop_back();
}

std::optional<WindowAggregate> aggregate_window(const TemporalState& temporal) {
  if (temporal.empty()) return std::nullopt;
  WindowAggregate agg;
  double weight = 1.0;
  for (const Snapshot& snap : temporal.buffer()) {
    weight *= temporal.tau();
    if (agg.features.size() == 0) {
      agg.features = weight * snap.features;
    } else {
      agg.features += weight * snap.features;
    }
    for (std::size_t r = 0; r < snap.user_ids.size(); ++r) {
      const Eigen::RowVectorXd row = weight * snap.users.row(static_cast<Index>(r));
      auto [it, inserted] = agg.users.try_emplace(snap.user_ids[r], row);
      if (!inserted) it->second += row;
    }
  }
  return agg;
}

UserPartition partition_users(std::span<const std::string> previous,
                              std::span<const std::string> current) {
  std::unordered_map<std::string_view, Index> prev_row;
  for (std::size_t i = 0; i < previous.size(); ++i) prev_row.emplace(previous[i], static_cast<Index>(i));

  UserPartition part;
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const std::string& id = current[i];
    if (!seen.insert(id).second) {
      throw InputError(fmt::format("user '{}' appears more than once in the batch", id));
    }
    const auto row = static_cast<Index>(i);
    if (const auto it = prev_row.find(id); it != prev_row.end()) {
      part.evolving.push_back({id, it->second, row});
    } else {
      part.fresh.push_back({id, row});
    }
  }
  for (const auto& id : previous)
    if (!seen.contains(id)) part.disappeared.push_back(id);
  std::sort(part.disappeared.begin(), part.disappeared.end());
  return part;
}

TemporalContext make_context(const BatchData& batch, const TemporalState& temporal) {
  const Index m = batch.bundle.m();
  const Index k = batch.bundle.k();
  TemporalContext ctx;
  ctx.partition = partition_users(temporal.registry(), batch.user_ids);
  ctx.user_target = DenseMatrix::Zero(m, k);
  ctx.user_prev = DenseMatrix::Zero(m, k);
  for (const auto& u : ctx.partition.fresh) ctx.new_rows.push_back(u.cur_row);

  auto agg = aggregate_window(temporal);
  if (!agg) return ctx;

  if (agg->features.rows() != batch.bundle.l() || agg->features.cols() != k) {
    throw InputError(fmt::format("window feature factor is {} but batch {} needs {}",
                                 shape_of(agg->features), batch.timestamp,
                                 shape_str(batch.bundle.l(), k)));
  }
  ctx.feature_target = std::move(agg->features);
  const Snapshot& last = temporal.buffer().front();
  for (const auto& u : ctx.partition.evolving) {
    const auto it = agg->users.find(u.id);
    if (it == agg->users.end()) {
      throw InputError(fmt::format("evolving user '{}' has no window aggregate", u.id));
    }
    ctx.user_target.row(u.cur_row) = it->second;
    ctx.user_prev.row(u.cur_row) = last.users.row(u.prev_row);
    ctx.evolving_rows.push_back(u.cur_row);
  }
  for (const auto& id : ctx.partition.disappeared) ctx.carried.emplace_back(id, agg->users.at(id));
  return ctx;
}

namespace {

const DenseMatrix& feature_target(const BatchData& batch, const TemporalContext& ctx) {
  return ctx.feature_target ? *ctx.feature_target : batch.bundle.lexicon_prior;
}

void require_aligned(const BatchData& batch, const TemporalContext& ctx) {
  if (ctx.user_target.rows() != batch.bundle.m() || ctx.user_prev.rows() != batch.bundle.m()) {
    throw InputError(fmt::format("temporal context has {} user rows but batch {} has {} users",
                                 ctx.user_target.rows(), batch.timestamp, batch.bundle.m()));
  }
}

}  // namespace

double online_objective(const FactorState& s, const BatchData& batch, const TemporalContext& ctx,
                        const StreamConfig& config) {
  const DataBundle& b = batch.bundle;
  validate_shapes(s, b);
  require_aligned(batch, ctx);
  const Parallelism par = config.solver.parallelism();
  double value = frob_residual_sq(b.tweet_features, s.tweets, s.tweet_assoc, s.features, par) +
                 frob_residual_sq(b.user_features, s.users, s.user_assoc, s.features, par) +
                 frob_residual_sq(b.user_tweets, s.users, std::nullopt, s.tweets, par) +
                 config.solver.alpha * (s.features - feature_target(batch, ctx)).squaredNorm() +
                 config.solver.beta * trace_quadratic(s.users, b.user_graph);
  // Disappeared users sit exactly at their aggregate and add nothing.
  if (!ctx.cold_start()) {
    double drift = 0.0;
    for (Index r : ctx.evolving_rows) drift += (s.users.row(r) - ctx.user_target.row(r)).squaredNorm();
    value += config.gamma * drift;
  }
  return value;
}

DenseMatrix online_update_tweet_assoc(const FactorState& s, const BatchData& batch,
                                      const StreamConfig& config) {
  return update_tweet_assoc(s, batch.bundle, config.solver);
}

DenseMatrix online_update_user_assoc(const FactorState& s, const BatchData& batch,
                                     const StreamConfig& config) {
  return update_user_assoc(s, batch.bundle, config.solver);
}

DenseMatrix online_update_tweets(const FactorState& s, const BatchData& batch,
                                 const StreamConfig& config) {
  return update_tweets(s, batch.bundle, config.solver);
}

DenseMatrix online_update_features(const FactorState& s, const BatchData& batch,
                                   const TemporalContext& ctx, const StreamConfig& config) {
  const SolverConfig& c = config.solver;
  const auto t = rules::feature_terms(s, batch.bundle.tweet_features, batch.bundle.user_features,
                                      feature_target(batch, ctx), c.alpha, c.parallelism());
  return hadamard_sqrt_update(s.features, t.numer, t.denom, c.eps);
}

DenseMatrix online_update_users_new(const FactorState& s, const BatchData& batch,
                                    const TemporalContext& ctx, const StreamConfig& config) {
  require_aligned(batch, ctx);
  const SolverConfig& c = config.solver;
  const DataBundle& b = batch.bundle;
  const auto parts =
      rules::user_parts(s, b.user_features, b.user_tweets, b.user_graph, c.beta, c.parallelism());
  const auto t = rules::user_terms(s, parts);
  DenseMatrix out = s.users;
  for (Index r : ctx.new_rows) {
    out.row(r) = hadamard_sqrt_update(s.users.row(r), t.numer.row(r), t.denom.row(r), c.eps);
  }
  return out;
}

DenseMatrix online_update_users_evolving(const FactorState& s, const BatchData& batch,
                                         const TemporalContext& ctx, const StreamConfig& config) {
  require_aligned(batch, ctx);
  const SolverConfig& c = config.solver;
  const DataBundle& b = batch.bundle;
  if (ctx.evolving_rows.empty()) return s.users;

  auto parts =
      rules::user_parts(s, b.user_features, b.user_tweets, b.user_graph, c.beta, c.parallelism());
  // The temporal multiplier term uses S_u(t-1), not the decayed S_uw(t).
  DenseMatrix step_back = DenseMatrix::Zero(s.users.rows(), s.users.cols());
  for (Index r : ctx.evolving_rows) step_back.row(r) = s.users.row(r) - ctx.user_prev.row(r);
  parts.delta -= config.gamma * (s.users.transpose() * step_back);
  const SignSplit d = split_pos_neg(parts.delta);

  DenseMatrix out = s.users;
  for (Index r : ctx.evolving_rows) {
    const Eigen::RowVectorXd row = s.users.row(r);
    const DenseMatrix numer = parts.gain.row(r) + row * d.minus + config.gamma * ctx.user_target.row(r);
    const DenseMatrix denom = parts.cost.row(r) + row * d.plus + config.gamma * row;
    out.row(r) = hadamard_sqrt_update(DenseMatrix(row), numer, denom, c.eps);
  }
  return out;
}

void online_sweep(FactorState& s, const BatchData& batch, const TemporalContext& ctx,
                  const StreamConfig& config, const UpdateObserver& observer) {
  auto notify = [&](std::string_view name) {
    if (observer) observer(name, s);
  };
  s.features = online_update_features(s, batch, ctx, config);
  notify("S_f");
  s.tweets = online_update_tweets(s, batch, config);
  notify("S_p");
  s.tweet_assoc = online_update_tweet_assoc(s, batch, config);
  notify("H_p");
  s.user_assoc = online_update_user_assoc(s, batch, config);
  notify("H_u");
  s.users = online_update_users_new(s, batch, ctx, config);
  notify("S_u(new)");
  s.users = online_update_users_evolving(s, batch, ctx, config);
  notify("S_u(evolving)");
}

FactorState online_init(const BatchData& batch, const TemporalContext& ctx,
                        const StreamConfig& config, std::uint64_t stream) {
  if (ctx.cold_start()) return init_factors(batch.bundle, config.solver);
  const DataBundle& b = batch.bundle;
  const Index k = b.k();
  Rng rng(config.solver.seed, stream);
  auto random_block = [&](Index rows, Index cols) {
    DenseMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(0.01, 1.0);
    return m;
  };
  FactorState s;
  s.features = *ctx.feature_target;
  s.tweets = random_block(b.n(), k);
  s.users = random_block(b.m(), k);
  s.tweet_assoc = random_block(k, k);
  s.user_assoc = random_block(k, k);
  // New-user rows start at the evolving users' scale. Rows far larger than
  // the rest of S_u make the graph part of the multiplier dominate and the
  // user update diverges.
  if (!ctx.evolving_rows.empty() && !ctx.new_rows.empty()) {
    double target_mass = 0.0, drawn_mass = 0.0;
    for (Index r : ctx.evolving_rows) target_mass += ctx.user_target.row(r).sum();
    for (Index r : ctx.new_rows) drawn_mass += s.users.row(r).sum();
    target_mass /= static_cast<double>(ctx.evolving_rows.size());
    drawn_mass /= static_cast<double>(ctx.new_rows.size());
    if (target_mass > 0.0) {
      for (Index r : ctx.new_rows) s.users.row(r) *= target_mass / drawn_mass;
    }
  }
  for (Index r : ctx.evolving_rows) s.users.row(r) = ctx.user_target.row(r);
  return s;
}

StepResult fit_online_step(const BatchData& batch, TemporalState& temporal,
                           const StreamConfig& config) {
  config.validate();
  if (batch.bundle.k() != config.solver.k) {
    throw InputError(fmt::format("batch {} has {} prior classes but {} clusters were requested",
                                 batch.timestamp, batch.bundle.k(), config.solver.k));
  }
  TemporalContext ctx = make_context(batch, temporal);
  StepResult result;
  result.timestamp = batch.timestamp;

  if (ctx.cold_start()) {
    // Empty window: no temporal terms, and the step is the offline fit.
    FitResult fit = fit_offline(batch.bundle, config.solver);
    result.state = std::move(fit.state);
    result.trace = std::move(fit.trace);
  } else {
    result.state = online_init(batch, ctx, config, static_cast<std::uint64_t>(batch.timestamp));
    ObjectiveTrace& trace = result.trace;
    double previous = online_objective(result.state, batch, ctx, config);
    trace.values.push_back(previous);
    for (int sweep = 1; sweep <= config.solver.max_iters; ++sweep) {
      online_sweep(result.state, batch, ctx, config);
      const double current = online_objective(result.state, batch, ctx, config);
      if (!std::isfinite(current)) {
        throw NumericError(fmt::format("batch {}: non-finite objective after sweep {}",
                                       batch.timestamp, sweep));
      }
      trace.values.push_back(current);
      trace.iterations = sweep;
      if (converged(previous, current, config.solver.tol)) {
        trace.converged = true;
        break;
      }
      previous = current;
    }
  }

  result.partition = std::move(ctx.partition);
  result.carried = std::move(ctx.carried);
  temporal.push({batch.timestamp, result.state.features, batch.user_ids, result.state.users});
  return result;
}

double StreamResult::total_ms() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.wall_ms;
  return total;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

StreamResult run_stream(std::span<const BatchData> batches, const StreamConfig& config) {
  config.validate();
  for (std::size_t i = 1; i < batches.size(); ++i) {
    if (batches[i].feature_ids != batches[0].feature_ids) {
      throw InputError(fmt::format("batch {} has a different feature space ({} features) than "
                                   "batch {} ({} features)",
                                   batches[i].timestamp, batches[i].feature_ids.size(),
                                   batches[0].timestamp, batches[0].feature_ids.size()));
    }
    if (batches[i].timestamp <= batches[i - 1].timestamp) {
      throw InputError(fmt::format("timestamps must increase: {} follows {}", batches[i].timestamp,
                                   batches[i - 1].timestamp));
    }
  }

  StreamResult result;
  result.mode = config.mode;
  TemporalState temporal(config.tau, config.window);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const BatchData& batch = batches[i];
    StreamStep step;
    step.timestamp = batch.timestamp;
    switch (config.mode) {
      case StreamMode::online: {
        const auto start = Clock::now();
        StepResult r = fit_online_step(batch, temporal, config);
        step.wall_ms = elapsed_ms(start);
        step.state = std::move(r.state);
        step.trace = std::move(r.trace);
        step.tweet_ids = batch.tweet_ids;
        step.user_ids = batch.user_ids;
        break;
      }
      case StreamMode::mini_batch: {
        const auto start = Clock::now();
        FitResult r = fit_offline(batch.bundle, config.solver);
        step.wall_ms = elapsed_ms(start);
        step.state = std::move(r.state);
        step.trace = std::move(r.trace);
        step.tweet_ids = batch.tweet_ids;
        step.user_ids = batch.user_ids;
        break;
      }
      case StreamMode::full_batch: {
        BatchData all = concatenate_batches(batches.subspan(0, i + 1));
        const auto start = Clock::now();
        FitResult r = fit_offline(all.bundle, config.solver);
        step.wall_ms = elapsed_ms(start);
        step.state = std::move(r.state);
        step.trace = std::move(r.trace);
        step.tweet_ids = std::move(all.tweet_ids);
        step.user_ids = std::move(all.user_ids);
        break;
      }
    }
    result.steps.push_back(std::move(step));
  }
  return result;
}

}  // namespace tricluster
