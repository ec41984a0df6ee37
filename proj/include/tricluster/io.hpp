#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tricluster/batch.hpp"
#include "tricluster/evaluation.hpp"
#include "tricluster/sparse_matrix.hpp"

namespace tricluster {

namespace fs = std::filesystem;

// Coordinate text format:
//   % optional comment
//   <rows> <cols> <nnz>
//   <i> <j> <v>        (nnz lines, 0-based)
SparseMatrix load_sparse_matrix(const fs::path& path);
SparseMatrix parse_sparse_matrix(std::istream& in, std::string_view source);
void save_sparse_matrix(const SparseMatrix& m, const fs::path& path, std::string_view comment = {});

// <row>\t<global-id>, rows 0..n-1 in order.
std::vector<std::string> load_id_map(const fs::path& path);
void save_id_map(std::span<const std::string> ids, const fs::path& path);

// <global-id>\t<class>
LabelVector load_labels(const fs::path& path);
void save_labels(const LabelVector& labels, const fs::path& path);

// <feature-id>\t<class>\t<probability>; features not listed get zero rows.
DenseMatrix load_prior(const fs::path& path, std::span<const std::string> feature_ids, int k);
void save_prior(const DenseMatrix& prior, std::span<const std::string> feature_ids,
                const fs::path& path);

// Batch directory layout.
inline constexpr std::string_view kTweetFeaturesFile = "X_p.txt";
inline constexpr std::string_view kUserFeaturesFile = "X_u.txt";
inline constexpr std::string_view kUserTweetsFile = "X_r.txt";
inline constexpr std::string_view kUserGraphFile = "G_u.txt";
inline constexpr std::string_view kTweetsFile = "tweets.tsv";
inline constexpr std::string_view kUsersFile = "users.tsv";
inline constexpr std::string_view kFeaturesFile = "features.tsv";
inline constexpr std::string_view kPriorFile = "S_f0.tsv";
inline constexpr std::string_view kTweetLabelsFile = "tweet_labels.tsv";
inline constexpr std::string_view kUserLabelsFile = "user_labels.tsv";
inline constexpr std::string_view kManifestFile = "manifest.tsv";

// Warnings (missing optional files) go to `log`.
BatchData load_batch(const fs::path& dir, int k, std::int64_t timestamp, std::ostream& log);
void save_batch(const BatchData& batch, const fs::path& dir);

struct ManifestEntry {
  std::int64_t timestamp = 0;
  fs::path dir;  // resolved against the manifest's directory

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// <timestamp>\t<dir>, strictly increasing timestamps.
std::vector<ManifestEntry> load_manifest(const fs::path& path);
void save_manifest(std::span<const ManifestEntry> entries, const fs::path& path);

// Everything needed to repeat a run.
struct RunConfig {
  std::string command;  // fit | stream
  std::string data;
  std::string mode;     // offline | online | mini-batch | full-batch
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  int window = 0;
  int clusters = 0;
  int max_iters = 0;
  double tol = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  int threads = 1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct Metrics {
  double tweet_accuracy = 0.0;
  double tweet_nmi = 0.0;
  double user_accuracy = 0.0;
  double user_nmi = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct RunRecord {
  std::int64_t timestamp = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;
  std::optional<Metrics> metrics;
  double wall_ms = 0.0;  // kept out of the report file

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct RunReport {
  RunConfig config;
  std::vector<RunRecord> records;
};

// JSON report without wall times, so repeated runs are byte-identical. Wall
// times go to a separate tab-separated file.
void write_report(const RunReport& report, const fs::path& path);
RunReport read_report(const fs::path& path);
void write_timings(const RunReport& report, const fs::path& path);

struct AssignmentRow {
  std::string kind;  // tweet | user
  std::string id;
  int cluster = 0;
  double score = 0.0;

  friend bool operator==(const AssignmentRow&, const AssignmentRow&) = default;
};

std::vector<AssignmentRow> make_assignments(const ClusterAssignment& tweets,
                                            const ClusterAssignment& users);
// kind\tid\tcluster\tscore, sorted by (kind, id).
void write_assignments(std::vector<AssignmentRow> rows, const fs::path& path);
std::vector<AssignmentRow> read_assignments(const fs::path& path);

}  // namespace tricluster
