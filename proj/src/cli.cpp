#include "tricluster/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include "CLI11.hpp"

#include "tricluster/io.hpp"
#include "tricluster/online_solver.hpp"
#include "tricluster/synth.hpp"

namespace tricluster {

namespace {

struct SolverFlags {
  double alpha = 0.0;
  double beta = 0.8;
  int clusters = 3;
  int max_iters = 200;
  double tol = 1e-6;
  double eps = 1e-12;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_solver_flags(CLI::App& cmd, SolverFlags& f) {
  cmd.add_option("--alpha", f.alpha, "lexicon prior weight")->capture_default_str();
  cmd.add_option("--beta", f.beta, "user graph weight")->capture_default_str();
  cmd.add_option("--clusters,-k", f.clusters, "number of clusters")->capture_default_str();
  cmd.add_option("--max-iters", f.max_iters, "sweep limit")->capture_default_str();
  cmd.add_option("--tol", f.tol, "relative objective change to stop at")->capture_default_str();
  cmd.add_option("--eps", f.eps, "denominator guard")->capture_default_str();
  cmd.add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd.add_option("--threads", f.threads, "solver threads")->capture_default_str();
}

SolverConfig to_solver(const SolverFlags& f) {
  SolverConfig c;
  c.alpha = f.alpha;
  c.beta = f.beta;
  c.k = f.clusters;
  c.max_iters = f.max_iters;
  c.tol = f.tol;
  c.eps = f.eps;
  c.seed = f.seed;
  c.threads = f.threads;
  return c;
}

RunConfig echo(std::string command, std::string data, std::string mode, const SolverFlags& f) {
  RunConfig c;
  c.command = std::move(command);
  c.data = std::move(data);
  c.mode = std::move(mode);
  c.alpha = f.alpha;
  c.beta = f.beta;
  c.clusters = f.clusters;
  c.max_iters = f.max_iters;
  c.tol = f.tol;
  c.eps = f.eps;
  c.seed = f.seed;
  c.threads = f.threads;
  return c;
}

// Scores this timestamp's entities only; predictions may cover more rows
// (full-batch solves the union).
std::optional<Metrics> score(const FactorState& s, std::span<const std::string> tweet_ids,
                             std::span<const std::string> user_ids, const BatchData& batch) {
  if (!batch.tweet_truth || !batch.user_truth) return std::nullopt;
  const auto tweets = assign_clusters(s.tweets, tweet_ids).labels.restricted_to(batch.tweet_truth->ids());
  const auto users = assign_clusters(s.users, user_ids).labels.restricted_to(batch.user_truth->ids());
  return Metrics{clustering_accuracy(tweets, *batch.tweet_truth), nmi(tweets, *batch.tweet_truth),
                 clustering_accuracy(users, *batch.user_truth), nmi(users, *batch.user_truth)};
}

void print_record(std::ostream& out, const RunRecord& r) {
  out << fmt::format("t={} iterations={} converged={} objective={:.6g}", r.timestamp, r.iterations,
                     r.converged ? "yes" : "no", r.objective.empty() ? 0.0 : r.objective.back());
  if (r.metrics) {
    out << fmt::format(" tweet_acc={:.4f} tweet_nmi={:.4f} user_acc={:.4f} user_nmi={:.4f}",
                       r.metrics->tweet_accuracy, r.metrics->tweet_nmi, r.metrics->user_accuracy,
                       r.metrics->user_nmi);
  }
  out << '\n';
}

int run_synth(const SynthSpec& spec, const fs::path& out_dir, std::ostream& out) {
  const auto batches = synth_generate(spec);
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> manifest;
  for (const auto& b : batches) {
    const fs::path rel = fmt::format("t{:03}", b.timestamp);
    save_batch(b, out_dir / rel);
    manifest.push_back({b.timestamp, rel});
  }
  save_manifest(manifest, out_dir / kManifestFile);
  out << fmt::format("wrote {} batch(es) to {}\n", batches.size(), out_dir.string());
  return 0;
}

// A batch directory, or a directory whose manifest lists exactly one batch.
std::pair<fs::path, std::int64_t> resolve_fit_data(const fs::path& data) {
  if (fs::exists(data / kTweetFeaturesFile)) return {data, 0};
  if (fs::exists(data / kManifestFile)) {
    const auto entries = load_manifest(data / kManifestFile);
    if (entries.size() != 1) {
      throw InputError(fmt::format("{} lists {} batches; fit takes one, use stream",
                                   (data / kManifestFile).string(), entries.size()));
    }
    return {entries.front().dir, entries.front().timestamp};
  }
  throw InputError(fmt::format("{}: no {} or {}", data.string(), kTweetFeaturesFile, kManifestFile));
}

int run_fit(const SolverFlags& f, const fs::path& data, const fs::path& out_dir, std::ostream& out,
            std::ostream& err) {
  const SolverConfig config = to_solver(f);
  config.validate();
  const auto [dir, ts] = resolve_fit_data(data);
  const BatchData batch = load_batch(dir, f.clusters, ts, err);

  const auto start = std::chrono::steady_clock::now();
  const FitResult fit = fit_offline(batch.bundle, config);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  RunReport report{echo("fit", data.string(), "offline", f), {}};
  report.records.push_back({batch.timestamp, fit.trace.iterations, fit.trace.converged,
                            fit.trace.values, score(fit.state, batch.tweet_ids, batch.user_ids, batch),
                            ms});
  fs::create_directories(out_dir);
  write_report(report, out_dir / "report.json");
  write_timings(report, out_dir / "timings.tsv");
  write_assignments(make_assignments(assign_clusters(fit.state.tweets, batch.tweet_ids),
                                     assign_clusters(fit.state.users, batch.user_ids)),
                    out_dir / "assignments.tsv");
  print_record(out, report.records.back());
  return 0;
}

int run_stream_cmd(const SolverFlags& f, const StreamConfig& stream_flags, const fs::path& manifest,
                   const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  StreamConfig config = stream_flags;
  config.solver = to_solver(f);
  config.validate();

  std::vector<BatchData> batches;
  for (const auto& e : load_manifest(manifest)) {
    batches.push_back(load_batch(e.dir, f.clusters, e.timestamp, err));
  }
  const StreamResult result = run_stream(batches, config);

  RunConfig cfg = echo("stream", manifest.string(), std::string(to_string(config.mode)), f);
  cfg.gamma = config.gamma;
  cfg.tau = config.tau;
  cfg.window = config.window;
  RunReport report{cfg, {}};
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& step = result.steps[i];
    report.records.push_back({step.timestamp, step.trace.iterations, step.trace.converged,
                              step.trace.values,
                              score(step.state, step.tweet_ids, step.user_ids, batches[i]),
                              step.wall_ms});
    write_assignments(make_assignments(assign_clusters(step.state.tweets, step.tweet_ids),
                                       assign_clusters(step.state.users, step.user_ids)),
                      out_dir / fmt::format("assignments_{}.tsv", step.timestamp));
    print_record(out, report.records.back());
  }
  write_report(report, out_dir / "report.json");
  write_timings(report, out_dir / "timings.tsv");
  out << fmt::format("mode={} total_ms={:.1f}\n", to_string(config.mode), result.total_ms());
  return 0;
}

// Predictions come either as a label file or as an assignments file.
LabelVector load_predictions(const fs::path& path, const std::string& kind) {
  std::ifstream probe(path);
  std::string first;
  std::getline(probe, first);
  if (std::count(first.begin(), first.end(), '\t') != 3) {
    if (!kind.empty()) throw InputError(fmt::format("{}: --kind needs an assignments file", path.string()));
    return load_labels(path);
  }
  LabelVector pred;
  for (const auto& r : read_assignments(path)) {
    if (kind.empty() || r.kind == kind) pred.entries.push_back({r.id, r.cluster});
  }
  pred.validate();
  return pred;
}

int run_eval(const fs::path& pred_path, const fs::path& truth_path, const std::string& metric,
             const std::string& kind, std::ostream& out) {
  const LabelVector truth = load_labels(truth_path);
  const LabelVector pred = load_predictions(pred_path, kind).restricted_to(truth.ids());
  if (metric == "accuracy" || metric == "both") {
    out << fmt::format("accuracy\t{:.6f}\n", clustering_accuracy(pred, truth));
  }
  if (metric == "nmi" || metric == "both") out << fmt::format("nmi\t{:.6f}\n", nmi(pred, truth));
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentiment tri-clustering of tweets, users and features"};
  app.name("tricluster");
  app.require_subcommand(1);

  SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "write a planted-partition stream");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--tweets", synth.tweets, "tweets per timestamp")->capture_default_str();
  synth_cmd->add_option("--users", synth.users, "users per timestamp")->capture_default_str();
  synth_cmd->add_option("--features", synth.features, "features")->capture_default_str();
  synth_cmd->add_option("--clusters", synth.clusters, "planted classes")->capture_default_str();
  synth_cmd->add_option("--separation", synth.separation, "in-block share of words")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Poisson noise per cell")->capture_default_str();
  synth_cmd->add_option("--timestamps", synth.timestamps, "number of batches")->capture_default_str();
  synth_cmd->add_option("--churn", synth.churn, "share of users replaced per step")->capture_default_str();
  synth_cmd->add_option("--drift", synth.drift, "share of users changing class per step")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();

  SolverFlags fit_flags;
  fit_flags.alpha = 0.05;
  std::string fit_data, fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "offline solve of one batch");
  fit_cmd->add_option("--data", fit_data, "batch directory")->required();
  fit_cmd->add_option("--out", fit_out, "output directory")->required();
  add_solver_flags(*fit_cmd, fit_flags);

  SolverFlags stream_flags;
  stream_flags.alpha = 0.9;
  StreamConfig stream_config;
  std::string stream_data, stream_out, mode = "online";
  auto* stream_cmd = app.add_subcommand("stream", "solve a stream of batches");
  stream_cmd->add_option("--data", stream_data, "manifest file")->required();
  stream_cmd->add_option("--out", stream_out, "output directory")->required();
  stream_cmd->add_option("--mode", mode, "solver mode")
      ->check(CLI::IsMember({"online", "mini-batch", "full-batch"}))
      ->capture_default_str();
  add_solver_flags(*stream_cmd, stream_flags);
  stream_cmd->add_option("--gamma", stream_config.gamma, "temporal weight")->capture_default_str();
  stream_cmd->add_option("--tau", stream_config.tau, "window decay")->capture_default_str();
  stream_cmd->add_option("--window", stream_config.window, "window length w")->capture_default_str();

  std::string pred, truth, metric = "both", kind;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against labels");
  eval_cmd->add_option("--pred", pred, "labels or assignments file")->required();
  eval_cmd->add_option("--truth", truth, "labels file")->required();
  eval_cmd->add_option("--metric", metric, "metric")
      ->check(CLI::IsMember({"accuracy", "nmi", "both"}))
      ->capture_default_str();
  eval_cmd->add_option("--kind", kind, "rows of an assignments file to use")
      ->check(CLI::IsMember({"tweet", "user"}));

  std::vector<std::string> argv_store{"tricluster"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code;
  }

  try {
    if (*synth_cmd) return run_synth(synth, synth_out, out);
    if (*fit_cmd) return run_fit(fit_flags, fit_data, fit_out, out, err);
    if (*stream_cmd) {
      stream_config.mode = parse_stream_mode(mode);
      return run_stream_cmd(stream_flags, stream_config, stream_data, stream_out, out, err);
    }
    if (*eval_cmd) return run_eval(pred, truth, metric, kind, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace tricluster
