#include "tricluster/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

namespace tricluster {

namespace {

using json = nlohmann::ordered_json;

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("{}: cannot open for reading", path.string()));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("{}: cannot open for writing", path.string()));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw InputError(fmt::format("{}: write failed", path.string()));
}

std::vector<std::string_view> split(std::string_view line, bool tabs_only) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  if (tabs_only) {
    while (true) {
      const auto j = line.find('\t', i);
      out.push_back(line.substr(i, j == std::string_view::npos ? j : j - i));
      if (j == std::string_view::npos) break;
      i = j + 1;
    }
    return out;
  }
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Reads tab-separated records, skipping blank lines. fn(fields, line_no).
template <class Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    fn(split(line, true), line_no);
  }
}

[[noreturn]] void fail_at(std::string_view source, std::size_t line_no, std::string_view what) {
  throw InputError(fmt::format("{}:{}: {}", source, line_no, what));
}

}  // namespace

SparseMatrix parse_sparse_matrix(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      line = strip_cr(std::move(line));
      if (line_no == 1 && line.starts_with('%')) continue;
      if (!split(line, false).empty()) return true;
    }
    return false;
  };

  if (!next()) throw InputError(fmt::format("{}: missing header line", source));
  const auto head = split(line, false);
  Index rows = 0, cols = 0, nnz = 0;
  if (head.size() != 3 || !parse_number(head[0], rows) || !parse_number(head[1], cols) ||
      !parse_number(head[2], nnz) || rows < 0 || cols < 0 || nnz < 0) {
    fail_at(source, line_no, "expected header '<rows> <cols> <nnz>'");
  }

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  while (next()) {
    const auto f = split(line, false);
    Triplet t;
    if (f.size() != 3 || !parse_number(f[0], t.row) || !parse_number(f[1], t.col) ||
        !parse_number(f[2], t.value)) {
      fail_at(source, line_no, "expected entry '<i> <j> <v>'");
    }
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      fail_at(source, line_no,
              fmt::format("index ({}, {}) out of bounds for {}", t.row, t.col, shape_str(rows, cols)));
    }
    if (!std::isfinite(t.value)) fail_at(source, line_no, "non-finite value");
    if (t.value < 0.0) fail_at(source, line_no, fmt::format("negative value {}", t.value));
    if (static_cast<Index>(entries.size()) == nnz) {
      fail_at(source, line_no, fmt::format("more entries than the declared {}", nnz));
    }
    entries.push_back(t);
  }
  if (static_cast<Index>(entries.size()) != nnz) {
    throw InputError(
        fmt::format("{}: header declares {} entries, found {}", source, nnz, entries.size()));
  }
  return SparseMatrix(rows, cols, entries);
}

SparseMatrix load_sparse_matrix(const fs::path& path) {
  auto in = open_in(path);
  return parse_sparse_matrix(in, path.string());
}

void save_sparse_matrix(const SparseMatrix& m, const fs::path& path, std::string_view comment) {
  auto out = open_out(path);
  std::string buf;
  if (!comment.empty()) buf += fmt::format("% {}\n", comment);
  buf += fmt::format("{} {} {}\n", m.rows(), m.cols(), m.nnz());
  for (const auto& t : m.entries()) buf += fmt::format("{} {} {}\n", t.row, t.col, t.value);
  out << buf;
  finish(out, path);
}

std::vector<std::string> load_id_map(const fs::path& path) {
  std::vector<std::string> ids;
  std::set<std::string, std::less<>> seen;
  for_each_record(path, [&](const auto& f, std::size_t line_no) {
    std::size_t row = 0;
    if (f.size() != 2 || !parse_number(f[0], row) || f[1].empty()) {
      fail_at(path.string(), line_no, "expected '<row>\\t<id>'");
    }
    if (row != ids.size()) {
      fail_at(path.string(), line_no, fmt::format("expected row {}, got {}", ids.size(), row));
    }
    if (!seen.emplace(f[1]).second) {
      fail_at(path.string(), line_no, fmt::format("duplicate id '{}'", f[1]));
    }
    ids.emplace_back(f[1]);
  });
  return ids;
}

void save_id_map(std::span<const std::string> ids, const fs::path& path) {
  auto out = open_out(path);
  std::string buf;
  for (std::size_t i = 0; i < ids.size(); ++i) buf += fmt::format("{}\t{}\n", i, ids[i]);
  out << buf;
  finish(out, path);
}

LabelVector load_labels(const fs::path& path) {
  LabelVector labels;
  std::set<std::string, std::less<>> seen;
  for_each_record(path, [&](const auto& f, std::size_t line_no) {
    int cls = 0;
    if (f.size() != 2 || f[0].empty() || !parse_number(f[1], cls) || cls < 0) {
      fail_at(path.string(), line_no, "expected '<id>\\t<class>'");
    }
    if (!seen.emplace(f[0]).second) {
      fail_at(path.string(), line_no, fmt::format("duplicate id '{}'", f[0]));
    }
    labels.entries.push_back({std::string(f[0]), cls});
  });
  return labels;
}

void save_labels(const LabelVector& labels, const fs::path& path) {
  auto out = open_out(path);
  std::string buf;
  for (const auto& e : labels.entries) buf += fmt::format("{}\t{}\n", e.id, e.cls);
  out << buf;
  finish(out, path);
}

DenseMatrix load_prior(const fs::path& path, std::span<const std::string> feature_ids, int k) {
  if (k < 1) throw InputError(fmt::format("prior needs k >= 1, got {}", k));
  std::map<std::string, Index, std::less<>> row_of;
  for (std::size_t i = 0; i < feature_ids.size(); ++i) row_of.emplace(feature_ids[i], static_cast<Index>(i));
  DenseMatrix prior = DenseMatrix::Zero(static_cast<Index>(feature_ids.size()), k);
  std::set<std::pair<Index, int>> seen;
  for_each_record(path, [&](const auto& f, std::size_t line_no) {
    int cls = 0;
    double p = 0.0;
    if (f.size() != 3 || !parse_number(f[1], cls) || !parse_number(f[2], p)) {
      fail_at(path.string(), line_no, "expected '<feature-id>\\t<class>\\t<probability>'");
    }
    const auto it = row_of.find(f[0]);
    if (it == row_of.end()) fail_at(path.string(), line_no, fmt::format("unknown feature '{}'", f[0]));
    if (cls < 0 || cls >= k) {
      fail_at(path.string(), line_no, fmt::format("class {} outside [0, {})", cls, k));
    }
    if (!(p >= 0.0 && p <= 1.0)) {
      fail_at(path.string(), line_no, fmt::format("probability {} outside [0, 1]", p));
    }
    if (!seen.emplace(it->second, cls).second) {
      fail_at(path.string(), line_no, fmt::format("duplicate entry for '{}' class {}", f[0], cls));
    }
    prior(it->second, cls) = p;
  });
  return prior;
}

void save_prior(const DenseMatrix& prior, std::span<const std::string> feature_ids,
                const fs::path& path) {
  if (static_cast<Index>(feature_ids.size()) != prior.rows()) {
    throw InputError(fmt::format("prior has {} rows but {} feature ids", prior.rows(), feature_ids.size()));
  }
  auto out = open_out(path);
  std::string buf;
  for (Index r = 0; r < prior.rows(); ++r) {
    for (Index c = 0; c < prior.cols(); ++c) {
      if (prior(r, c) != 0.0) {
        buf += fmt::format("{}\t{}\t{}\n", feature_ids[static_cast<std::size_t>(r)], c, prior(r, c));
      }
    }
  }
  out << buf;
  finish(out, path);
}

BatchData load_batch(const fs::path& dir, int k, std::int64_t timestamp, std::ostream& log) {
  if (!fs::is_directory(dir)) throw InputError(fmt::format("{}: not a directory", dir.string()));
  const auto file = [&](std::string_view name) { return dir / name; };
  const auto name = [&](std::string_view n) { return file(n).string(); };

  const auto xp = load_sparse_matrix(file(kTweetFeaturesFile));
  const auto xu = load_sparse_matrix(file(kUserFeaturesFile));
  const auto xr = load_sparse_matrix(file(kUserTweetsFile));
  const auto features = load_id_map(file(kFeaturesFile));
  const auto users = load_id_map(file(kUsersFile));

  const auto mismatch = [&](std::string_view a, std::string_view what_a, Index va,
                            std::string_view b, std::string_view what_b, Index vb) {
    if (va != vb) {
      throw InputError(fmt::format("shape mismatch: {} has {} {} but {} has {} {}", name(a), va,
                                   what_a, name(b), vb, what_b));
    }
  };
  const auto nfeat = static_cast<Index>(features.size());
  const auto nusers = static_cast<Index>(users.size());
  mismatch(kTweetFeaturesFile, "columns", xp.cols(), kFeaturesFile, "features", nfeat);
  mismatch(kUserFeaturesFile, "columns", xu.cols(), kFeaturesFile, "features", nfeat);
  mismatch(kUserFeaturesFile, "rows", xu.rows(), kUsersFile, "users", nusers);
  mismatch(kUserTweetsFile, "rows", xr.rows(), kUserFeaturesFile, "rows", xu.rows());
  mismatch(kUserTweetsFile, "columns", xr.cols(), kTweetFeaturesFile, "rows", xp.rows());

  SparseMatrix graph(nusers, nusers);
  if (fs::exists(file(kUserGraphFile))) {
    graph = load_sparse_matrix(file(kUserGraphFile));
    mismatch(kUserGraphFile, "rows", graph.rows(), kUsersFile, "users", nusers);
    mismatch(kUserGraphFile, "columns", graph.cols(), kUsersFile, "users", nusers);
  } else {
    log << fmt::format("warning: {} missing, using an empty user graph\n", name(kUserGraphFile));
  }

  std::vector<std::string> tweets;
  if (fs::exists(file(kTweetsFile))) {
    tweets = load_id_map(file(kTweetsFile));
    mismatch(kTweetsFile, "tweets", static_cast<Index>(tweets.size()), kTweetFeaturesFile, "rows",
             xp.rows());
  } else {
    for (Index i = 0; i < xp.rows(); ++i) tweets.push_back(fmt::format("t{}:{}", timestamp, i));
  }

  DenseMatrix prior;
  if (fs::exists(file(kPriorFile))) {
    prior = load_prior(file(kPriorFile), features, k);
  } else {
    log << fmt::format("warning: {} missing, using an all-zero prior\n", name(kPriorFile));
    prior = DenseMatrix::Zero(nfeat, k);
  }

  BatchData batch{timestamp,
                  DataBundle::make(xp, xu, xr, graph, std::move(prior)),
                  std::move(tweets),
                  users,
                  features,
                  std::nullopt,
                  std::nullopt};
  if (fs::exists(file(kTweetLabelsFile))) batch.tweet_truth = load_labels(file(kTweetLabelsFile));
  if (fs::exists(file(kUserLabelsFile))) batch.user_truth = load_labels(file(kUserLabelsFile));
  batch.validate();
  return batch;
}

void save_batch(const BatchData& batch, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& b = batch.bundle;
  save_sparse_matrix(b.tweet_features, dir / kTweetFeaturesFile, "tweet x feature");
  save_sparse_matrix(b.user_features, dir / kUserFeaturesFile, "user x feature");
  save_sparse_matrix(b.user_tweets, dir / kUserTweetsFile, "user x tweet");
  save_sparse_matrix(b.user_graph.adjacency, dir / kUserGraphFile, "user x user");
  save_id_map(batch.tweet_ids, dir / kTweetsFile);
  save_id_map(batch.user_ids, dir / kUsersFile);
  save_id_map(batch.feature_ids, dir / kFeaturesFile);
  save_prior(b.lexicon_prior, batch.feature_ids, dir / kPriorFile);
  if (batch.tweet_truth) save_labels(*batch.tweet_truth, dir / kTweetLabelsFile);
  if (batch.user_truth) save_labels(*batch.user_truth, dir / kUserLabelsFile);
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::vector<ManifestEntry> entries;
  const fs::path base = path.parent_path();
  for_each_record(path, [&](const auto& f, std::size_t line_no) {
    std::int64_t ts = 0;
    if (f.size() != 2 || !parse_number(f[0], ts) || f[1].empty()) {
      fail_at(path.string(), line_no, "expected '<timestamp>\\t<dir>'");
    }
    if (!entries.empty() && ts <= entries.back().timestamp) {
      fail_at(path.string(), line_no,
              fmt::format("timestamp {} does not follow {}", ts, entries.back().timestamp));
    }
    fs::path dir{std::string(f[1])};
    if (dir.is_relative()) dir = base / dir;
    entries.push_back({ts, dir});
  });
  if (entries.empty()) throw InputError(fmt::format("{}: empty manifest", path.string()));
  return entries;
}

void save_manifest(std::span<const ManifestEntry> entries, const fs::path& path) {
  auto out = open_out(path);
  std::string buf;
  for (const auto& e : entries) buf += fmt::format("{}\t{}\n", e.timestamp, e.dir.generic_string());
  out << buf;
  finish(out, path);
}

namespace {

json config_json(const RunConfig& c) {
  return json{{"command", c.command}, {"data", c.data},       {"mode", c.mode},
              {"alpha", c.alpha},     {"beta", c.beta},       {"gamma", c.gamma},
              {"tau", c.tau},         {"window", c.window},   {"clusters", c.clusters},
              {"max_iters", c.max_iters}, {"tol", c.tol},     {"eps", c.eps},
              {"seed", c.seed},       {"threads", c.threads}};
}

RunConfig config_from(const json& j) {
  RunConfig c;
  j.at("command").get_to(c.command);
  j.at("data").get_to(c.data);
  j.at("mode").get_to(c.mode);
  j.at("alpha").get_to(c.alpha);
  j.at("beta").get_to(c.beta);
  j.at("gamma").get_to(c.gamma);
  j.at("tau").get_to(c.tau);
  j.at("window").get_to(c.window);
  j.at("clusters").get_to(c.clusters);
  j.at("max_iters").get_to(c.max_iters);
  j.at("tol").get_to(c.tol);
  j.at("eps").get_to(c.eps);
  j.at("seed").get_to(c.seed);
  j.at("threads").get_to(c.threads);
  return c;
}

}  // namespace

void write_report(const RunReport& report, const fs::path& path) {
  json records = json::array();
  for (const auto& r : report.records) {
    json rec{{"timestamp", r.timestamp},
             {"iterations", r.iterations},
             {"converged", r.converged},
             {"objective", r.objective}};
    if (r.metrics) {
      rec["metrics"] = json{{"tweet_accuracy", r.metrics->tweet_accuracy},
                            {"tweet_nmi", r.metrics->tweet_nmi},
                            {"user_accuracy", r.metrics->user_accuracy},
                            {"user_nmi", r.metrics->user_nmi}};
    }
    records.push_back(std::move(rec));
  }
  const json doc{{"config", config_json(report.config)}, {"records", std::move(records)}};
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

RunReport read_report(const fs::path& path) {
  auto in = open_in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  RunReport report;
  try {
    report.config = config_from(doc.at("config"));
    for (const auto& rec : doc.at("records")) {
      RunRecord r;
      rec.at("timestamp").get_to(r.timestamp);
      rec.at("iterations").get_to(r.iterations);
      rec.at("converged").get_to(r.converged);
      rec.at("objective").get_to(r.objective);
      if (rec.contains("metrics")) {
        const auto& m = rec.at("metrics");
        r.metrics = Metrics{m.at("tweet_accuracy").get<double>(), m.at("tweet_nmi").get<double>(),
                            m.at("user_accuracy").get<double>(), m.at("user_nmi").get<double>()};
      }
      report.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: malformed report: {}", path.string(), e.what()));
  }
  return report;
}

void write_timings(const RunReport& report, const fs::path& path) {
  auto out = open_out(path);
  std::string buf = "timestamp\twall_ms\n";
  for (const auto& r : report.records) buf += fmt::format("{}\t{:.3f}\n", r.timestamp, r.wall_ms);
  out << buf;
  finish(out, path);
}

std::vector<AssignmentRow> make_assignments(const ClusterAssignment& tweets,
                                            const ClusterAssignment& users) {
  std::vector<AssignmentRow> rows;
  const auto add = [&](std::string_view kind, const ClusterAssignment& a) {
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      rows.push_back({std::string(kind), a.labels.entries[i].id, a.labels.entries[i].cls, a.scores[i]});
    }
  };
  add("tweet", tweets);
  add("user", users);
  return rows;
}

void write_assignments(std::vector<AssignmentRow> rows, const fs::path& path) {
  std::sort(rows.begin(), rows.end(), [](const AssignmentRow& a, const AssignmentRow& b) {
    return std::tie(a.kind, a.id) < std::tie(b.kind, b.id);
  });
  auto out = open_out(path);
  std::string buf;
  for (const auto& r : rows) buf += fmt::format("{}\t{}\t{}\t{}\n", r.kind, r.id, r.cluster, r.score);
  out << buf;
  finish(out, path);
}

std::vector<AssignmentRow> read_assignments(const fs::path& path) {
  std::vector<AssignmentRow> rows;
  for_each_record(path, [&](const auto& f, std::size_t line_no) {
    AssignmentRow r;
    if (f.size() != 4 || f[1].empty() || !parse_number(f[2], r.cluster) ||
        !parse_number(f[3], r.score) || r.cluster < 0) {
      fail_at(path.string(), line_no, "expected '<kind>\\t<id>\\t<cluster>\\t<score>'");
    }
    r.kind = std::string(f[0]);
    r.id = std::string(f[1]);
    rows.push_back(std::move(r));
  });
  return rows;
}

}  // namespace tricluster
