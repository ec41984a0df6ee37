#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tricluster/batch.hpp"
#include "tricluster/offline_solver.hpp"

namespace tricluster {

enum class StreamMode { online, mini_batch, full_batch };

std::string_view to_string(StreamMode mode);
StreamMode parse_stream_mode(std::string_view text);

struct StreamConfig {
  SolverConfig solver{.alpha = 0.9, .beta = 0.8};
  double gamma = 0.2;  // temporal weight on evolving users
  double tau = 0.9;    // decay per step back in the window
  int window = 2;      // w: the aggregate spans the previous w-1 steps
  StreamMode mode = StreamMode::online;

  void validate() const;
};

// Factors kept from one finished timestamp.
struct Snapshot {
  std::int64_t timestamp = 0;
  DenseMatrix features;
  std::vector<std::string> user_ids;
  DenseMatrix users;
};

// Sliding buffer of the last w-1 snapshots, newest first.
class TemporalState {
 public:
  TemporalState(double tau, int window);

  double tau() const { return tau_; }
  int window() const { return window_; }
  bool empty() const { return buffer_.empty(); }
  const std::deque<Snapshot>& buffer() const { return buffer_; }

  // Users of the most recent snapshot, in row order.
  std::vector<std::string> registry() const;

  void push(Snapshot snapshot);

 private:
  double tau_;
  int window_;
  std::deque<Snapshot> buffer_;
};

// Decayed window aggregates: features = sum_i tau^i S_f(t-i), and per user
// sum_i tau^i S_u(t-i) over the snapshots that contain the user.
struct WindowAggregate {
  DenseMatrix features;
  std::unordered_map<std::string, Eigen::RowVectorXd> users;
};

std::optional<WindowAggregate> aggregate_window(const TemporalState& temporal);

struct EvolvingUser {
  std::string id;
  Index prev_row;
  Index cur_row;
};

struct NewUser {
  std::string id;
  Index cur_row;
};

struct UserPartition {
  std::vector<std::string> disappeared;  // sorted
  std::vector<EvolvingUser> evolving;    // in current row order
  std::vector<NewUser> fresh;            // in current row order
};

UserPartition partition_users(std::span<const std::string> previous,
                              std::span<const std::string> current);

// Everything the temporal terms need at one timestamp, row-aligned with the
// batch. Built once per timestamp, before the sweeps.
struct TemporalContext {
  UserPartition partition;
  std::optional<DenseMatrix> feature_target;  // S_fw(t); absent on cold start
  DenseMatrix user_target;  // S_uw(t) on evolving rows, zero elsewhere
  DenseMatrix user_prev;    // S_u(t-1) on evolving rows, zero elsewhere
  std::vector<Index> evolving_rows;
  std::vector<Index> new_rows;
  // Disappeared users pinned at their decayed aggregate.
  std::vector<std::pair<std::string, Eigen::RowVectorXd>> carried;

  bool cold_start() const { return !feature_target.has_value(); }
};

TemporalContext make_context(const BatchData& batch, const TemporalState& temporal);

double online_objective(const FactorState& state, const BatchData& batch,
                        const TemporalContext& ctx, const StreamConfig& config);

DenseMatrix online_update_tweet_assoc(const FactorState& state, const BatchData& batch,
                                      const StreamConfig& config);
DenseMatrix online_update_user_assoc(const FactorState& state, const BatchData& batch,
                                     const StreamConfig& config);
DenseMatrix online_update_tweets(const FactorState& state, const BatchData& batch,
                                 const StreamConfig& config);
DenseMatrix online_update_features(const FactorState& state, const BatchData& batch,
                                   const TemporalContext& ctx, const StreamConfig& config);
// Returns the full user factor with only new-user rows changed.
DenseMatrix online_update_users_new(const FactorState& state, const BatchData& batch,
                                    const TemporalContext& ctx, const StreamConfig& config);
// Returns the full user factor with only evolving-user rows changed.
DenseMatrix online_update_users_evolving(const FactorState& state, const BatchData& batch,
                                         const TemporalContext& ctx, const StreamConfig& config);

// One pass in the order S_f; S_p, H_p; H_u; new users; evolving users.
void online_sweep(FactorState& state, const BatchData& batch, const TemporalContext& ctx,
                  const StreamConfig& config, const UpdateObserver& observer = {});

// Initial factors: S_f from the window, evolving users from their aggregate,
// everything else random.
FactorState online_init(const BatchData& batch, const TemporalContext& ctx,
                        const StreamConfig& config, std::uint64_t stream);

struct StepResult {
  std::int64_t timestamp = 0;
  FactorState state;
  ObjectiveTrace trace;
  UserPartition partition;
  std::vector<std::pair<std::string, Eigen::RowVectorXd>> carried;
};

// Solves one timestamp and pushes its snapshot into `temporal`. With an
// empty window this is exactly the offline fit.
StepResult fit_online_step(const BatchData& batch, TemporalState& temporal,
                           const StreamConfig& config);

struct StreamStep {
  std::int64_t timestamp = 0;
  FactorState state;
  ObjectiveTrace trace;
  std::vector<std::string> tweet_ids;  // rows of state.tweets
  std::vector<std::string> user_ids;   // rows of state.users
  double wall_ms = 0.0;                // solver time only
};

struct StreamResult {
  StreamMode mode = StreamMode::online;
  std::vector<StreamStep> steps;

  double total_ms() const;
};

StreamResult run_stream(std::span<const BatchData> batches, const StreamConfig& config);

}  // namespace tricluster
