#pragma once

// Dataset model and on-disk formats. A dataset directory holds five files:
//
//   manifest.json   {"name":..., "nodes":n, "edges":m, "features":d, "classes":C}
//   graph.edges     one undirected edge per line, "u<TAB>v", 0-based ids
//   features.csv    n lines of comma-separated decimals
//   labels.csv      n lines of integer class ids
//   splits.json     {"train":[...], "val":[...], "test":[...]}
//
// Undirected input edges are expanded to both directions on load; duplicates
// are dropped, and self-loop lines are ignored (self-loops are a model-side
// policy, added explicitly via add_self_loops).

#include <kedge/common.hpp>

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace kedge {

struct Graph {
  int n = 0;
  Mat features;             // n x d
  std::vector<int> labels;  // one class id per node
  int classes = 0;
  std::vector<Edge> edges;  // directed, both directions present, no self-loops
  std::vector<int> train, val, test;

  int feature_dim() const { return static_cast<int>(features.cols()); }
  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n == b.n && a.classes == b.classes && a.labels == b.labels && a.edges == b.edges &&
           a.train == b.train && a.val == b.val && a.test == b.test &&
           a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
           a.features == b.features;
  }
};

struct DatasetManifest {
  std::string name;
  int nodes = 0;
  int edges = 0;  // undirected edge count
  int features = 0;
  int classes = 0;
};

// Edge-indexed sparse matrix; the edge order is fixed at construction and
// shared by every aligned per-edge vector (mask, noise, gate parameters).
struct EdgeSparseMat {
  int n = 0;
  std::vector<Edge> edges;
  std::vector<int> src_ids, dst_ids;  // aligned with edges, for tape ops
  Vec values;

  int edge_count() const { return static_cast<int>(edges.size()); }

  static EdgeSparseMat build(int n, std::vector<Edge> edges, Vec values = Vec()) {
    EdgeSparseMat m;
    m.n = n;
    m.edges = std::move(edges);
    if (values.size() == 0) values = Vec::Ones(static_cast<Eigen::Index>(m.edges.size()));
    if (values.size() != static_cast<Eigen::Index>(m.edges.size()))
      throw ShapeError("EdgeSparseMat: values not aligned with edges");
    m.values = std::move(values);
    std::unordered_set<long long> seen;
    seen.reserve(m.edges.size());
    for (const Edge& e : m.edges) {
      if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
        throw ShapeError("EdgeSparseMat: edge endpoint out of range");
      if (!seen.insert(static_cast<long long>(e.src) * n + e.dst).second)
        throw ShapeError("EdgeSparseMat: duplicate edge");
    }
    m.src_ids.reserve(m.edges.size());
    m.dst_ids.reserve(m.edges.size());
    for (const Edge& e : m.edges) {
      m.src_ids.push_back(e.src);
      m.dst_ids.push_back(e.dst);
    }
    return m;
  }
};

namespace detail {

[[noreturn]] inline void load_fail(const std::filesystem::path& file, int line,
                                   const std::string& msg) {
  throw LoadError(file.string() + ":" + std::to_string(line) + ": " + msg);
}

inline std::ifstream open_or_fail(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("missing file: " + file.string());
  return in;
}

inline int parse_int(std::string_view tok, const std::filesystem::path& file, int line) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    load_fail(file, line, "expected an integer, got '" + std::string(tok) + "'");
  return v;
}

inline Real parse_real(std::string_view tok, const std::filesystem::path& file, int line) {
  Real v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    load_fail(file, line, "non-numeric feature value '" + std::string(tok) + "'");
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace detail

inline Graph load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;

  DatasetManifest man;
  {
    const fs::path file = dir / "manifest.json";
    auto in = detail::open_or_fail(file);
    json j;
    try {
      in >> j;
      man.name = j.at("name").get<std::string>();
      man.nodes = j.at("nodes").get<int>();
      man.edges = j.at("edges").get<int>();
      man.features = j.at("features").get<int>();
      man.classes = j.at("classes").get<int>();
    } catch (const json::exception& e) {
      throw LoadError(file.string() + ": " + e.what());
    }
  }

  Graph g;
  g.n = man.nodes;
  g.classes = man.classes;

  {
    const fs::path file = dir / "features.csv";
    auto in = detail::open_or_fail(file);
    g.features = Mat::Zero(man.nodes, man.features);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      if (row >= man.nodes)
        detail::load_fail(file, row + 1, "more feature rows than manifest nodes");
      std::string_view rest = detail::trim(line);
      int col = 0;
      while (true) {
        const size_t comma = rest.find(',');
        const std::string_view tok = detail::trim(rest.substr(0, comma));
        if (col >= man.features)
          detail::load_fail(file, row + 1, "more feature columns than manifest declares");
        g.features(row, col++) = detail::parse_real(tok, file, row + 1);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (col != man.features)
        detail::load_fail(file, row + 1, "expected " + std::to_string(man.features) +
                                             " features, got " + std::to_string(col));
      ++row;
    }
    if (row != man.nodes)
      detail::load_fail(file, row, "expected " + std::to_string(man.nodes) + " rows, got " +
                                       std::to_string(row));
    if (!g.features.allFinite()) throw LoadError(file.string() + ": non-finite feature value");
  }

  {
    const fs::path file = dir / "labels.csv";
    auto in = detail::open_or_fail(file);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      if (row >= man.nodes) detail::load_fail(file, row + 1, "more labels than nodes");
      const int label = detail::parse_int(detail::trim(line), file, row + 1);
      if (label < 0 || label >= man.classes)
        detail::load_fail(file, row + 1, "label " + std::to_string(label) + " outside [0," +
                                             std::to_string(man.classes) + ")");
      g.labels.push_back(label);
      ++row;
    }
    if (row != man.nodes)
      detail::load_fail(file, row, "expected " + std::to_string(man.nodes) + " labels, got " +
                                       std::to_string(row));
  }

  {
    const fs::path file = dir / "graph.edges";
    auto in = detail::open_or_fail(file);
    std::string line;
    int lineno = 0;
    int undirected = 0;
    std::unordered_set<long long> seen;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string_view sv = detail::trim(line);
      if (sv.empty()) continue;
      const size_t tab = sv.find('\t');
      if (tab == std::string_view::npos)
        detail::load_fail(file, lineno, "expected 'u<TAB>v'");
      const int u = detail::parse_int(detail::trim(sv.substr(0, tab)), file, lineno);
      const int v = detail::parse_int(detail::trim(sv.substr(tab + 1)), file, lineno);
      if (u < 0 || u >= man.nodes || v < 0 || v >= man.nodes)
        detail::load_fail(file, lineno, "node id out of range [0," + std::to_string(man.nodes) + ")");
      if (u == v) continue;  // self-loops are a model-side policy
      const long long key = static_cast<long long>(std::min(u, v)) * man.nodes + std::max(u, v);
      if (!seen.insert(key).second) continue;
      ++undirected;
      g.edges.push_back({u, v});
      g.edges.push_back({v, u});
    }
    if (undirected != man.edges)
      throw LoadError(file.string() + ": manifest declares " + std::to_string(man.edges) +
                      " undirected edges, file has " + std::to_string(undirected));
  }

  {
    const fs::path file = dir / "splits.json";
    auto in = detail::open_or_fail(file);
    json j;
    std::vector<char> owner(man.nodes, 0);
    try {
      in >> j;
      auto read_split = [&](const char* key, std::vector<int>& out, char tag) {
        for (int v : j.at(key).get<std::vector<int>>()) {
          if (v < 0 || v >= man.nodes)
            throw LoadError(file.string() + ": split node id " + std::to_string(v) +
                            " out of range");
          if (owner[v] != 0)
            throw LoadError(file.string() + ": node " + std::to_string(v) +
                            " appears in more than one split");
          owner[v] = tag;
          out.push_back(v);
        }
      };
      read_split("train", g.train, 1);
      read_split("val", g.val, 2);
      read_split("test", g.test, 3);
    } catch (const json::exception& e) {
      throw LoadError(file.string() + ": " + e.what());
    }
  }

  return g;
}

inline void save_dataset(const Graph& g, const std::filesystem::path& dir,
                         const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  // undirected pairs in first-encounter order of the directed list
  std::vector<Edge> pairs;
  {
    std::unordered_set<long long> seen;
    for (const Edge& e : g.edges) {
      const long long key =
          static_cast<long long>(std::min(e.src, e.dst)) * g.n + std::max(e.src, e.dst);
      if (seen.insert(key).second) pairs.push_back(e);
    }
  }

  {
    std::ofstream out(dir / "manifest.json");
    nlohmann::json j{{"name", name},
                     {"nodes", g.n},
                     {"edges", static_cast<int>(pairs.size())},
                     {"features", g.feature_dim()},
                     {"classes", g.classes}};
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "graph.edges");
    for (const Edge& e : pairs) out << e.src << "\t" << e.dst << "\n";
  }
  {
    std::ofstream out(dir / "features.csv");
    char buf[64];
    for (Eigen::Index r = 0; r < g.features.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", g.features(r, c));
        out << (c ? "," : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    for (int label : g.labels) out << label << "\n";
  }
  {
    std::ofstream out(dir / "splits.json");
    nlohmann::json j{{"train", g.train}, {"val", g.val}, {"test", g.test}};
    out << j.dump() << "\n";
  }
}

// Stochastic block model stand-in for the citation graphs: block-indicator
// features plus Gaussian noise, labels = block ids, 60/20/20 split.
inline Graph make_sbm(int blocks, int per_block, Real p_in, Real p_out, int d, uint64_t seed) {
  if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1)
    throw DomainError("make_sbm: probabilities must lie in [0,1]");
  std::mt19937_64 rng(seed);
  Graph g;
  g.n = blocks * per_block;
  g.classes = blocks;
  g.labels.resize(g.n);
  for (int i = 0; i < g.n; ++i) g.labels[i] = i / per_block;

  std::normal_distribution<Real> noise(0.0, 0.3);
  g.features = Mat::Zero(g.n, d);
  for (int i = 0; i < g.n; ++i) {
    for (int c = 0; c < d; ++c) g.features(i, c) = noise(rng);
    g.features(i, g.labels[i] % d) += 1.0;
  }

  std::uniform_real_distribution<Real> coin(0.0, 1.0);
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j) {
      const Real p = g.labels[i] == g.labels[j] ? p_in : p_out;
      if (coin(rng) < p) {
        g.edges.push_back({i, j});
        g.edges.push_back({j, i});
      }
    }

  std::vector<int> order(g.n);
  for (int i = 0; i < g.n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(0.6 * g.n);
  const int n_val = static_cast<int>(0.2 * g.n);
  g.train.assign(order.begin(), order.begin() + n_train);
  g.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  g.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(g.train.begin(), g.train.end());
  std::sort(g.val.begin(), g.val.end());
  std::sort(g.test.begin(), g.test.end());
  return g;
}

// A-tilde = A + I with unit values; gates apply to these edges.
inline EdgeSparseMat add_self_loops(const EdgeSparseMat& a) {
  std::unordered_set<int> has_loop;
  for (const Edge& e : a.edges)
    if (e.src == e.dst) has_loop.insert(e.src);
  std::vector<Edge> edges = a.edges;
  Vec values(a.values.size() + (a.n - static_cast<int>(has_loop.size())));
  values.head(a.values.size()) = a.values;
  Eigen::Index k = a.values.size();
  for (int i = 0; i < a.n; ++i)
    if (!has_loop.count(i)) {
      edges.push_back({i, i});
      values[k++] = 1.0;
    }
  return EdgeSparseMat::build(a.n, std::move(edges), std::move(values));
}

inline EdgeSparseMat add_self_loops(const Graph& g) {
  return add_self_loops(EdgeSparseMat::build(g.n, g.edges));
}

// L1 row normalization (the common preprocessing for bag-of-words features).
inline Mat row_normalize(const Mat& x) {
  Mat out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Real s = out.row(r).cwiseAbs().sum();
    if (s > 1e-12) out.row(r) /= s;
  }
  return out;
}

}  // namespace kedge
