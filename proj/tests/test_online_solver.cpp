#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>

#include "naive.hpp"
#include "tricluster/online_solver.hpp"
#include "tricluster/synth.hpp"

using namespace tricluster;

namespace {

std::vector<std::string> ids(std::initializer_list<const char*> list) {
  return {list.begin(), list.end()};
}

BatchData make_batch(std::int64_t ts, const naive::Bundle& nb, std::vector<std::string> users) {
  BatchData b{ts, naive::to_bundle(nb), {}, std::move(users), {}, std::nullopt, std::nullopt};
  for (std::size_t i = 0; i < naive::rows(nb.xp); ++i) b.tweet_ids.push_back(fmt::format("p{}:{}", ts, i));
  for (std::size_t i = 0; i < naive::rows(nb.prior); ++i) b.feature_ids.push_back(fmt::format("f{}", i));
  return b;
}

std::vector<std::string> user_names(std::size_t from, std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(fmt::format("u{:03}", from + i));
  return out;
}

double max_rel_change(const DenseMatrix& before, const DenseMatrix& after) {
  double worst = 0.0;
  for (Index i = 0; i < before.rows(); ++i)
    for (Index j = 0; j < before.cols(); ++j) {
      const double b = before(i, j), a = after(i, j);
      worst = std::max(worst, b == 0.0 ? (a == 0.0 ? 0.0 : 1.0) : std::abs(a - b) / b);
    }
  return worst;
}

StreamConfig scalar_config() {
  StreamConfig c;
  c.solver.alpha = 0.0;
  c.solver.beta = 0.0;
  c.solver.k = 1;
  return c;
}

}  // namespace

TEST(StreamConfig, DefaultsAndValidation) {
  StreamConfig c;
  EXPECT_DOUBLE_EQ(c.solver.alpha, 0.9);
  EXPECT_DOUBLE_EQ(c.tau, 0.9);
  EXPECT_DOUBLE_EQ(c.gamma, 0.2);
  EXPECT_DOUBLE_EQ(c.solver.beta, 0.8);
  EXPECT_EQ(c.window, 2);
  EXPECT_NO_THROW(c.validate());
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.tau = 1.1;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.window = 1;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.gamma = -1.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(StreamMode, ParseAndPrint) {
  for (auto m : {StreamMode::online, StreamMode::mini_batch, StreamMode::full_batch})
    EXPECT_EQ(parse_stream_mode(to_string(m)), m);
  EXPECT_THROW(parse_stream_mode("batch"), InputError);
}

TEST(AggregateWindow, DecayedSnapshots) {
  TemporalState t(0.9, 2);
  EXPECT_FALSE(aggregate_window(t).has_value());

  const DenseMatrix sf = DenseMatrix::Constant(3, 2, 0.5);
  DenseMatrix su(2, 2);
  su << 1, 2, 3, 4;
  t.push({1, sf, ids({"a", "b"}), su});
  const auto agg = aggregate_window(t);
  ASSERT_TRUE(agg);
  EXPECT_EQ(agg->features, DenseMatrix(0.9 * sf));
  EXPECT_EQ(agg->users.at("b"), Eigen::RowVectorXd(0.9 * su.row(1)));

  TemporalState nodecay(1.0, 2);
  nodecay.push({1, sf, ids({"a", "b"}), su});
  EXPECT_EQ(aggregate_window(nodecay)->features, sf);

  // w = 2 keeps one snapshot.
  t.push({2, 2.0 * sf, ids({"a"}), su.topRows(1)});
  EXPECT_EQ(t.buffer().size(), 1u);
  EXPECT_EQ(aggregate_window(t)->features, DenseMatrix(0.9 * 2.0 * sf));
  EXPECT_THROW(t.push({2, sf, ids({"a"}), su.topRows(1)}), InputError);
}

TEST(AggregateWindow, LongerWindowSumsPowers) {
  TemporalState t(0.5, 4);
  const DenseMatrix one = DenseMatrix::Ones(2, 2);
  DenseMatrix u = DenseMatrix::Ones(1, 2);
  for (int ts = 1; ts <= 4; ++ts) t.push({ts, ts * one, ids({"a"}), ts * u});
  EXPECT_EQ(t.buffer().size(), 3u);
  // snapshots 4, 3, 2 weighted 0.5, 0.25, 0.125
  const double want = 0.5 * 4 + 0.25 * 3 + 0.125 * 2;
  EXPECT_NEAR(aggregate_window(t)->features(0, 0), want, 1e-15);
  EXPECT_NEAR(aggregate_window(t)->users.at("a")(1), want, 1e-15);
}

TEST(PartitionUsers, SetDifference) {
  const auto p = partition_users(ids({"u1", "u2", "u3"}), ids({"u2", "u3", "u4"}));
  EXPECT_EQ(p.disappeared, ids({"u1"}));
  ASSERT_EQ(p.evolving.size(), 2u);
  EXPECT_EQ(p.evolving[0].id, "u2");
  EXPECT_EQ(p.evolving[0].prev_row, 1);
  EXPECT_EQ(p.evolving[0].cur_row, 0);
  ASSERT_EQ(p.fresh.size(), 1u);
  EXPECT_EQ(p.fresh[0].id, "u4");

  EXPECT_EQ(partition_users({}, ids({"a", "b"})).fresh.size(), 2u);
  EXPECT_EQ(partition_users(ids({"a", "b"}), {}).disappeared, ids({"a", "b"}));
  EXPECT_THROW(partition_users({}, ids({"a", "a"})), InputError);
}

TEST(PartitionUsers, DisjointAndCoveringOnRandomChurn) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 30);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::string> a, b;
    for (int i = 0; i < 15; ++i) a.insert(fmt::format("u{}", pick(rng)));
    for (int i = 0; i < 15; ++i) b.insert(fmt::format("u{}", pick(rng)));
    std::vector<std::string> prev(a.begin(), a.end()), cur(b.begin(), b.end());
    std::shuffle(prev.begin(), prev.end(), rng);
    std::shuffle(cur.begin(), cur.end(), rng);
    const auto p = partition_users(prev, cur);

    std::set<std::string> d(p.disappeared.begin(), p.disappeared.end()), e, n;
    for (const auto& u : p.evolving) {
      e.insert(u.id);
      EXPECT_EQ(prev[static_cast<std::size_t>(u.prev_row)], u.id);
      EXPECT_EQ(cur[static_cast<std::size_t>(u.cur_row)], u.id);
    }
    for (const auto& u : p.fresh) {
      n.insert(u.id);
      EXPECT_EQ(cur[static_cast<std::size_t>(u.cur_row)], u.id);
    }
    std::set<std::string> en = e, de = d;
    en.insert(n.begin(), n.end());
    de.insert(e.begin(), e.end());
    EXPECT_EQ(en, b);
    EXPECT_EQ(de, a);
    EXPECT_EQ(d.size() + e.size() + n.size(), de.size() + n.size());
    for (const auto& x : n) EXPECT_FALSE(a.contains(x));
  }
}

TEST(MakeContext, AlignsByIdNotRow) {
  TemporalState t(0.9, 2);
  DenseMatrix su(3, 2);
  su << 1, 0, 0, 1, 2, 2;
  t.push({1, DenseMatrix::Ones(4, 2), ids({"a", "b", "c"}), su});

  std::mt19937_64 rng(9);
  const auto nb = naive::random_bundle(rng, 5, 3, 4, 2);
  const BatchData batch = make_batch(2, nb, ids({"c", "d", "a"}));
  const auto ctx = make_context(batch, t);
  EXPECT_FALSE(ctx.cold_start());
  EXPECT_EQ(ctx.evolving_rows, (std::vector<Index>{0, 2}));
  EXPECT_EQ(ctx.new_rows, (std::vector<Index>{1}));
  EXPECT_EQ(Eigen::RowVectorXd(ctx.user_target.row(0)), Eigen::RowVectorXd(0.9 * su.row(2)));
  EXPECT_EQ(Eigen::RowVectorXd(ctx.user_prev.row(2)), Eigen::RowVectorXd(su.row(0)));
  EXPECT_EQ(ctx.user_target.row(1).squaredNorm(), 0.0);
  ASSERT_EQ(ctx.carried.size(), 1u);
  EXPECT_EQ(ctx.carried[0].first, "b");
  EXPECT_EQ(ctx.carried[0].second, Eigen::RowVectorXd(0.9 * su.row(1)));

  const auto cold = make_context(batch, TemporalState(0.9, 2));
  EXPECT_TRUE(cold.cold_start());
  EXPECT_EQ(cold.new_rows.size(), 3u);
}

TEST(OnlineObjective, ScalarGammaTerm) {
  // Evolving user with S_u(t-1) = 1, so S_uw = 0.9 and the gamma term is
  // 0.2 * (1 - 0.9)^2.
  TemporalState t(0.9, 2);
  t.push({1, DenseMatrix::Ones(1, 1), ids({"u"}), DenseMatrix::Ones(1, 1)});
  auto one = [](double v) { return SparseMatrix(1, 1, std::vector<Triplet>{{0, 0, v}}); };
  const BatchData batch{2, DataBundle::make(one(2), one(1), one(1), SparseMatrix(1, 1), DenseMatrix::Zero(1, 1)),
                        ids({"p"}), ids({"u"}), ids({"f"}), std::nullopt, std::nullopt};
  const auto ctx = make_context(batch, t);
  const DenseMatrix o = DenseMatrix::Ones(1, 1);
  const FactorState s{o, o, o, o, o};
  StreamConfig c = scalar_config();
  EXPECT_NEAR(online_objective(s, batch, ctx, c), 1.0 + 0.2 * 0.01, 1e-12);

  // Cold start drops the gamma term.
  EXPECT_NEAR(online_objective(s, batch, make_context(batch, TemporalState(0.9, 2)), c), 1.0, 1e-12);
}

TEST(OnlineObjective, RejectsMisalignedContext) {
  std::mt19937_64 rng(10);
  const auto nb = naive::random_bundle(rng, 4, 3, 4, 2);
  const BatchData batch = make_batch(1, nb, user_names(0, 3));
  TemporalContext ctx;
  ctx.user_target = DenseMatrix::Zero(2, 2);
  ctx.user_prev = DenseMatrix::Zero(2, 2);
  const auto s = naive::to_state(naive::random_state(rng, 4, 3, 4, 2));
  StreamConfig c;
  c.solver.k = 2;
  EXPECT_THROW(online_objective(s, batch, ctx, c), InputError);
}

namespace {

struct OnlineFixture {
  naive::Bundle nb;
  naive::State ns;
  BatchData batch;
  TemporalContext ctx;
  naive::Mat sfw, suw, suprev;
  std::vector<bool> evolving, fresh;
};

// Previous step had users u000..u(m-1); the current batch keeps some,
// drops some and adds some, in shuffled order.
OnlineFixture online_fixture(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t l,
                             std::size_t k, double tau) {
  OnlineFixture f;
  const auto prev_users = user_names(0, m);
  const naive::Mat prev_su = naive::random_dense(rng, m, k);
  const naive::Mat prev_sf = naive::random_dense(rng, l, k);
  TemporalState t(tau, 2);
  t.push({1, naive::to_dense(prev_sf), prev_users, naive::to_dense(prev_su)});

  std::vector<std::string> cur = user_names(m / 3, m - m / 3);
  for (auto& u : user_names(100, m / 3)) cur.push_back(u);
  std::shuffle(cur.begin(), cur.end(), rng);

  f.nb = naive::random_bundle(rng, n, cur.size(), l, k);
  f.ns = naive::random_state(rng, n, cur.size(), l, k);
  f.batch = make_batch(2, f.nb, cur);
  f.ctx = make_context(f.batch, t);

  f.sfw = naive::scale(tau, prev_sf);
  f.suw = naive::zeros(cur.size(), k);
  f.suprev = naive::zeros(cur.size(), k);
  for (std::size_t r = 0; r < cur.size(); ++r) {
    const auto it = std::find(prev_users.begin(), prev_users.end(), cur[r]);
    const bool ev = it != prev_users.end();
    f.evolving.push_back(ev);
    f.fresh.push_back(!ev);
    if (ev) {
      const auto pr = static_cast<std::size_t>(it - prev_users.begin());
      f.suprev[r] = prev_su[pr];
      f.suw[r] = naive::scale(tau, naive::Mat{prev_su[pr]})[0];
    }
  }
  return f;
}

}  // namespace

TEST(OnlineUpdates, MatchNaiveOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(3, 10), kk(2, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = static_cast<std::size_t>(kk(rng));
    const auto n = static_cast<std::size_t>(dim(rng)), m = static_cast<std::size_t>(dim(rng));
    const auto l = std::max<std::size_t>(k, static_cast<std::size_t>(dim(rng)));
    const auto f = online_fixture(rng, n, m, l, k, 0.9);
    StreamConfig c;
    c.solver.k = static_cast<int>(k);
    c.solver.alpha = 0.7;
    c.solver.beta = 0.5;
    c.gamma = 0.4;
    const double eps = c.solver.eps;
    const FactorState s = naive::to_state(f.ns);

    EXPECT_LE(naive::rel_err(online_objective(s, f.batch, f.ctx, c),
                             naive::objective(f.ns, f.nb, f.sfw, c.solver.alpha, c.solver.beta) +
                                 c.gamma * naive::frob2(naive::sub(
                                               [&] {
                                                 naive::Mat masked = f.ns.su;
                                                 for (std::size_t r = 0; r < masked.size(); ++r)
                                                   if (!f.evolving[r]) masked[r] = f.suw[r];
                                                 return masked;
                                               }(),
                                               f.suw))),
              1e-10);
    EXPECT_LE(naive::rel_err(online_update_features(s, f.batch, f.ctx, c),
                             naive::update_sf(f.ns, f.nb, f.sfw, c.solver.alpha, eps)),
              1e-10);
    EXPECT_LE(naive::rel_err(online_update_tweets(s, f.batch, c), naive::update_sp(f.ns, f.nb, eps)), 1e-10);
    EXPECT_LE(naive::rel_err(online_update_tweet_assoc(s, f.batch, c),
                             naive::update_h(f.ns.sp, f.nb.xp, f.ns.sf, f.ns.hp, eps)),
              1e-10);
    EXPECT_LE(naive::rel_err(online_update_user_assoc(s, f.batch, c),
                             naive::update_h(f.ns.su, f.nb.xu, f.ns.sf, f.ns.hu, eps)),
              1e-10);
    EXPECT_LE(naive::rel_err(online_update_users_new(s, f.batch, f.ctx, c),
                             naive::update_su_new(f.ns, f.nb, c.solver.beta, eps, f.fresh)),
              1e-10);
    EXPECT_LE(naive::rel_err(online_update_users_evolving(s, f.batch, f.ctx, c),
                             naive::update_su_evolving(f.ns, f.nb, c.solver.beta, c.gamma, eps,
                                                       f.evolving, f.suw, f.suprev)),
              1e-10);
  }
}

TEST(OnlineUpdates, OnlyTheirRowsChange) {
  std::mt19937_64 rng(12);
  const auto f = online_fixture(rng, 6, 9, 7, 3, 0.9);
  StreamConfig c;
  const FactorState s = naive::to_state(f.ns);
  const DenseMatrix fresh = online_update_users_new(s, f.batch, f.ctx, c);
  const DenseMatrix evolving = online_update_users_evolving(s, f.batch, f.ctx, c);
  for (std::size_t r = 0; r < f.evolving.size(); ++r) {
    const auto row = static_cast<Index>(r);
    if (f.evolving[r]) {
      EXPECT_EQ(fresh.row(row), s.users.row(row));
      EXPECT_NE(evolving.row(row), s.users.row(row));
    } else {
      EXPECT_EQ(evolving.row(row), s.users.row(row));
      EXPECT_NE(fresh.row(row), s.users.row(row));
    }
  }
}

TEST(OnlineUpdates, GammaZeroMatchesNewUserRule) {
  std::mt19937_64 rng(13);
  const auto f = online_fixture(rng, 6, 9, 7, 3, 0.9);
  StreamConfig c;
  c.gamma = 0.0;
  const FactorState s = naive::to_state(f.ns);
  const DenseMatrix evolving = online_update_users_evolving(s, f.batch, f.ctx, c);
  const DenseMatrix all = update_users(s, f.batch.bundle, c.solver);
  for (Index r : f.ctx.evolving_rows) EXPECT_LE((evolving.row(r) - all.row(r)).norm(), 1e-14 * all.row(r).norm());
}

TEST(OnlineUpdates, ScalarCases) {
  auto one = [](double v) { return SparseMatrix(1, 1, std::vector<Triplet>{{0, 0, v}}); };
  const DenseMatrix o = DenseMatrix::Ones(1, 1);
  const FactorState s{o, o, o, o, o};
  StreamConfig c = scalar_config();
  TemporalState t(0.9, 2);
  t.push({1, o, ids({"old"}), o});
  const BatchData b{2, DataBundle::make(one(2), one(3), one(1), SparseMatrix(1, 1), DenseMatrix::Zero(1, 1)),
                    ids({"p"}), ids({"new"}), ids({"f"}), std::nullopt, std::nullopt};
  const auto ctx = make_context(b, t);
  EXPECT_NEAR(online_update_user_assoc(s, b, c)(0, 0), std::sqrt(3.0), 1e-10);
  EXPECT_NEAR(online_update_tweet_assoc(s, b, c)(0, 0), std::sqrt(2.0), 1e-10);

  const BatchData b2{2, DataBundle::make(one(2), one(1), one(1), SparseMatrix(1, 1), DenseMatrix::Zero(1, 1)),
                     ids({"p"}), ids({"new"}), ids({"f"}), std::nullopt, std::nullopt};
  const auto ctx2 = make_context(b2, t);
  EXPECT_NEAR(online_update_features(s, b2, ctx2, c)(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(online_update_tweets(s, b2, c)(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(online_update_users_new(s, b2, ctx2, c)(0, 0), 1.0, 1e-12);
  (void)ctx;
}

TEST(OnlineUpdates, ZeroResidualIsFixedPoint) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [ns, nb] = naive::zero_residual(rng, 8, 9, 7, 3);
    const auto users = user_names(0, 9);
    const BatchData batch = make_batch(2, nb, users);
    TemporalContext ctx;
    ctx.feature_target = naive::to_dense(ns.sf);
    ctx.user_target = naive::to_dense(ns.su);
    ctx.user_prev = naive::to_dense(ns.su);
    for (Index r = 0; r < 9; ++r) (r % 2 ? ctx.evolving_rows : ctx.new_rows).push_back(r);
    for (Index r : ctx.new_rows) {
      ctx.user_target.row(r).setZero();
      ctx.user_prev.row(r).setZero();
    }
    StreamConfig c;
    c.solver.alpha = 0.0;
    c.solver.beta = 0.0;
    c.gamma = 0.0;
    const FactorState s = naive::to_state(ns);
    const double tol = 10 * c.solver.eps;
    EXPECT_LE(max_rel_change(s.features, online_update_features(s, batch, ctx, c)), tol);
    EXPECT_LE(max_rel_change(s.tweets, online_update_tweets(s, batch, c)), tol);
    EXPECT_LE(max_rel_change(s.tweet_assoc, online_update_tweet_assoc(s, batch, c)), tol);
    EXPECT_LE(max_rel_change(s.user_assoc, online_update_user_assoc(s, batch, c)), tol);
    EXPECT_LE(max_rel_change(s.users, online_update_users_new(s, batch, ctx, c)), tol);
    EXPECT_LE(max_rel_change(s.users, online_update_users_evolving(s, batch, ctx, c)), tol);

    // With S_u = S_uw = S_u(t-1) the gamma terms cancel too.
    c.gamma = 0.5;
    c.solver.alpha = 0.5;
    EXPECT_LE(max_rel_change(s.users, online_update_users_evolving(s, batch, ctx, c)), tol);
    EXPECT_LE(max_rel_change(s.features, online_update_features(s, batch, ctx, c)), tol);
  }
}

TEST(OnlineUpdates, EvolvingRowsMoveTowardAggregate) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> factor(0.3, 2.5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [ns, nb] = naive::zero_residual(rng, 8, 9, 7, 3);
    const BatchData batch = make_batch(2, nb, user_names(0, 9));
    TemporalContext ctx;
    ctx.feature_target = naive::to_dense(ns.sf);
    const DenseMatrix su = naive::to_dense(ns.su);
    ctx.user_target = su;
    for (Index i = 0; i < su.rows(); ++i)
      for (Index j = 0; j < su.cols(); ++j) ctx.user_target(i, j) *= factor(rng);
    ctx.user_prev = su;
    for (Index r = 0; r < 9; ++r) ctx.evolving_rows.push_back(r);
    StreamConfig c;
    c.solver.beta = 0.0;
    const FactorState s = naive::to_state(ns);
    const DenseMatrix out = online_update_users_evolving(s, batch, ctx, c);
    for (Index i = 0; i < su.rows(); ++i)
      for (Index j = 0; j < su.cols(); ++j)
        if (su(i, j) > 0.0 && su(i, j) != ctx.user_target(i, j)) {
          EXPECT_LT(std::abs(out(i, j) - ctx.user_target(i, j)), std::abs(su(i, j) - ctx.user_target(i, j)));
        }
  }
}

TEST(OnlineSweep, OrderAndNonNegativity) {
  std::mt19937_64 rng(16);
  const auto f = online_fixture(rng, 8, 9, 7, 3, 0.9);
  StreamConfig c;
  FactorState s = naive::to_state(f.ns);
  std::vector<std::string> order;
  online_sweep(s, f.batch, f.ctx, c, [&](std::string_view name, const FactorState& st) {
    order.emplace_back(name);
    EXPECT_GE(st.min_entry(), 0.0);
  });
  EXPECT_EQ(order, (std::vector<std::string>{"S_f", "S_p", "H_p", "H_u", "S_u(new)", "S_u(evolving)"}));
}

TEST(OnlineInit, UsesWindowAndAggregates) {
  std::mt19937_64 rng(17);
  const auto f = online_fixture(rng, 8, 9, 7, 3, 0.9);
  StreamConfig c;
  const FactorState s = online_init(f.batch, f.ctx, c, 2);
  EXPECT_EQ(s.features, *f.ctx.feature_target);
  for (Index r : f.ctx.evolving_rows) EXPECT_EQ(s.users.row(r), f.ctx.user_target.row(r));
  EXPECT_GT(s.min_entry(), 0.0);
  EXPECT_EQ(s, online_init(f.batch, f.ctx, c, 2));
}

TEST(FitOnlineStep, ColdStartEqualsOfflineFit) {
  SynthSpec spec;
  spec.tweets = 200;
  spec.users = 60;
  spec.features = 60;
  const auto batch = synth_generate(spec).front();
  StreamConfig c;
  c.solver.seed = 5;
  TemporalState t(c.tau, c.window);
  const auto step = fit_online_step(batch, t, c);
  const auto fit = fit_offline(batch.bundle, c.solver);
  EXPECT_EQ(step.state, fit.state);
  EXPECT_EQ(step.trace.values, fit.trace.values);
  EXPECT_EQ(t.buffer().size(), 1u);
  EXPECT_EQ(t.registry(), batch.user_ids);
}

TEST(FitOnlineStep, RepeatedBatchKeepsAssignments) {
  SynthSpec spec;
  spec.tweets = 300;
  spec.users = 90;
  spec.features = 60;
  auto batch = synth_generate(spec).front();
  StreamConfig c;
  TemporalState t(c.tau, c.window);
  const auto first = fit_online_step(batch, t, c);
  batch.timestamp = 2;
  const auto second = fit_online_step(batch, t, c);
  EXPECT_EQ(assign_clusters(first.state.users, batch.user_ids).labels,
            assign_clusters(second.state.users, batch.user_ids).labels);
  EXPECT_EQ(assign_clusters(first.state.tweets, batch.tweet_ids).labels,
            assign_clusters(second.state.tweets, batch.tweet_ids).labels);
  EXPECT_EQ(second.partition.evolving.size(), batch.user_ids.size());
}

TEST(FitOnlineStep, PlantedDriftingStreamConverges) {
  SynthSpec spec;
  spec.timestamps = 5;
  spec.churn = 0.2;
  spec.drift = 0.05;
  const auto batches = synth_generate(spec);
  StreamConfig c;
  TemporalState t(c.tau, c.window);
  for (const auto& b : batches) {
    const auto step = fit_online_step(b, t, c);
    EXPECT_TRUE(step.state.all_finite_nonnegative());
    EXPECT_TRUE(step.trace.converged) << "t=" << b.timestamp;
    EXPECT_LE(step.trace.iterations, 100) << "t=" << b.timestamp;
  }
}

TEST(RunStream, SingleBatchModesAgree) {
  SynthSpec spec;
  spec.tweets = 200;
  spec.users = 60;
  spec.features = 60;
  const auto batches = synth_generate(spec);
  StreamConfig c;
  std::vector<StreamResult> results;
  for (auto mode : {StreamMode::online, StreamMode::mini_batch, StreamMode::full_batch}) {
    c.mode = mode;
    results.push_back(run_stream(batches, c));
    EXPECT_EQ(results.back().steps.size(), 1u);
  }
  EXPECT_EQ(results[0].steps[0].state, results[1].steps[0].state);
  EXPECT_EQ(results[0].steps[0].state, results[2].steps[0].state);
  EXPECT_EQ(results[2].steps[0].user_ids, batches[0].user_ids);
}

TEST(RunStream, FullBatchGrowsAndValidates) {
  SynthSpec spec;
  spec.tweets = 100;
  spec.users = 40;
  spec.features = 30;
  spec.timestamps = 3;
  spec.churn = 0.25;
  auto batches = synth_generate(spec);
  StreamConfig c;
  c.mode = StreamMode::full_batch;
  const auto r = run_stream(batches, c);
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_EQ(r.steps[2].tweet_ids.size(), 300u);
  EXPECT_EQ(r.steps[2].user_ids.size(), 40u + 10u + 10u);
  for (const auto& s : r.steps) EXPECT_GE(s.wall_ms, 0.0);

  auto bad = batches;
  bad[2].timestamp = 1;
  EXPECT_THROW(run_stream(bad, c), InputError);
  bad = batches;
  bad[1].feature_ids.back() = "other";
  EXPECT_THROW(run_stream(bad, c), InputError);
}
