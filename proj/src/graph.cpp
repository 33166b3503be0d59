#include "duplex/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace duplex {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Forward: return "forward";
    case Relation::Reverse: return "reverse";
    case Relation::Bidirectional: return "bidirectional";
    case Relation::NoEdge: return "noedge";
  }
  return "?";
}

uint64_t bounded_rand(std::mt19937_64& rng, uint64_t n) {
  if (n == 0) throw std::invalid_argument("bounded_rand: empty range");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

bool DiGraph::has_edge(int u, int v) const {
  const auto& nbrs = out_adj[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

int DiGraph::rebuild_adjacency() {
  int dropped = 0;
  std::vector<Edge> clean;
  clean.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.first == e.second) {
      ++dropped;
      continue;
    }
    clean.push_back(e);
  }
  std::sort(clean.begin(), clean.end());
  auto last = std::unique(clean.begin(), clean.end());
  dropped += static_cast<int>(clean.end() - last);
  clean.erase(last, clean.end());
  edges = std::move(clean);

  in_adj.assign(num_nodes, {});
  out_adj.assign(num_nodes, {});
  for (const auto& [u, v] : edges) {
    out_adj[u].push_back(v);
    in_adj[v].push_back(u);
  }
  for (auto& a : out_adj) std::sort(a.begin(), a.end());
  for (auto& a : in_adj) std::sort(a.begin(), a.end());
  return dropped;
}

DiGraph DiGraph::from_edges(int num_nodes, std::vector<Edge> edges) {
  DiGraph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(edges);
  for (const auto& [u, v] : g.edges)
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw std::out_of_range("from_edges: node id out of range");
  g.rebuild_adjacency();
  return g;
}

DiGraph load_edge_list(const std::string& path, std::optional<int> num_nodes) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open edge list: " + path);

  std::vector<Edge> raw;
  std::string line;
  int lineno = 0;
  long long max_id = -1;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u)) continue;  // blank / comment-only line
    if (!(ss >> v)) throw ParseError(path + ":" + std::to_string(lineno) + ": expected two ids");
    std::string extra;
    if (ss >> extra)
      throw ParseError(path + ":" + std::to_string(lineno) + ": trailing token '" + extra + "'");
    if (u < 0 || v < 0)
      throw ParseError(path + ":" + std::to_string(lineno) + ": negative node id");
    if (num_nodes && (u >= *num_nodes || v >= *num_nodes))
      throw std::out_of_range(path + ":" + std::to_string(lineno) + ": node id " +
                              std::to_string(std::max(u, v)) + " >= declared num_nodes " +
                              std::to_string(*num_nodes));
    max_id = std::max({max_id, u, v});
    raw.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }

  DiGraph g;
  if (num_nodes) {
    g.num_nodes = *num_nodes;
    g.edges = std::move(raw);
  } else {
    // Remap ids to dense 0..n-1 in ascending-id order.
    std::vector<int> ids;
    ids.reserve(raw.size() * 2);
    for (const auto& [u, v] : raw) {
      ids.push_back(u);
      ids.push_back(v);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    // Already dense? Keep ids verbatim so simple files read back unchanged.
    const bool dense = !ids.empty() && ids.front() == 0 &&
                       ids.back() == static_cast<int>(ids.size()) - 1;
    if (dense || ids.empty()) {
      g.num_nodes = static_cast<int>(ids.size());
      g.edges = std::move(raw);
    } else {
      std::map<int, int> remap;
      for (size_t i = 0; i < ids.size(); ++i) remap[ids[i]] = static_cast<int>(i);
      g.num_nodes = static_cast<int>(ids.size());
      g.edges.reserve(raw.size());
      for (const auto& [u, v] : raw) g.edges.emplace_back(remap[u], remap[v]);
    }
  }
  int dropped = g.rebuild_adjacency();
  if (dropped > 0)
    std::cerr << "note: " << path << ": dropped " << dropped
              << " duplicate/self-loop edge entries\n";
  return g;
}

void load_features_labels(const std::string& path, DiGraph& g) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open features file: " + path);

  std::vector<char> seen(g.num_nodes, 0);
  std::vector<std::vector<double>> feats(g.num_nodes);
  g.labels.assign(g.num_nodes, -1);

  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected node_id,label,features");
    int id, label;
    try {
      id = std::stoi(cells[0]);
      label = std::stoi(cells[1]);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad id/label field");
    }
    if (id < 0 || id >= g.num_nodes)
      throw std::out_of_range(path + ":" + std::to_string(lineno) + ": node id out of range");
    if (seen[id]) throw ParseError(path + ":" + std::to_string(lineno) + ": duplicate node row");
    if (label < 0) throw ParseError(path + ":" + std::to_string(lineno) + ": negative label");
    const int f = static_cast<int>(cells.size()) - 2;
    if (dim < 0) dim = f;
    if (f != dim)
      throw ParseError(path + ":" + std::to_string(lineno) + ": row has " + std::to_string(f) +
                       " features, expected " + std::to_string(dim));
    seen[id] = 1;
    g.labels[id] = label;
    auto& row = feats[id];
    row.resize(f);
    for (int j = 0; j < f; ++j) {
      try {
        row[j] = std::stod(cells[2 + j]);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad feature value '" +
                         cells[2 + j] + "'");
      }
    }
  }
  std::string missing;
  int nmiss = 0;
  for (int i = 0; i < g.num_nodes; ++i)
    if (!seen[i]) {
      if (nmiss < 8) missing += (nmiss ? "," : "") + std::to_string(i);
      ++nmiss;
    }
  if (nmiss > 0)
    throw ParseError(path + ": missing rows for " + std::to_string(nmiss) + " nodes (" + missing +
                     (nmiss > 8 ? ",..." : "") + ")");
  if (dim < 0) dim = 0;
  g.features = Matrix(g.num_nodes, dim);
  for (int i = 0; i < g.num_nodes; ++i)
    std::copy(feats[i].begin(), feats[i].end(), g.features.row(i));
  int max_label = -1;
  for (int l : g.labels) max_label = std::max(max_label, l);
  g.num_classes = max_label + 1;
}

HamEntry ham_lookup(const DiGraph& g, int u, int v) {
  if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes)
    throw std::out_of_range("ham_lookup: node id out of range");
  if (u == v) throw std::invalid_argument("ham_lookup: diagonal (u == v) is undefined");
  const bool fwd = g.has_edge(u, v);
  const bool rev = g.has_edge(v, u);
  Relation r = fwd ? (rev ? Relation::Bidirectional : Relation::Forward)
                   : (rev ? Relation::Reverse : Relation::NoEdge);
  return {r, relation_prototype(r)};
}

LinkSplit split_edges(const DiGraph& g, std::array<int, 3> ratio, uint64_t seed) {
  for (int r : ratio)
    if (r <= 0) throw ConfigError("split_edges: ratio entries must be positive");
  const long long E = static_cast<long long>(g.edges.size());
  const long long T = ratio[0] + ratio[1] + ratio[2];
  if (E < T)
    throw ConfigError("split_edges: graph has " + std::to_string(E) +
                      " edges, fewer than ratio total " + std::to_string(T));

  std::vector<int> order(g.edges.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::mt19937_64 rng(seed);
  shuffle_vec(order, rng);

  const long long s1 = E * ratio[0] / T;
  const long long s2 = E * (ratio[0] + ratio[1]) / T;
  LinkSplit out;
  out.train_edges.reserve(s1);
  out.val_edges.reserve(s2 - s1);
  out.test_edges.reserve(E - s2);
  for (long long i = 0; i < E; ++i) {
    const Edge& e = g.edges[order[i]];
    if (i < s1)
      out.train_edges.push_back(e);
    else if (i < s2)
      out.val_edges.push_back(e);
    else
      out.test_edges.push_back(e);
  }
  out.train_graph = DiGraph::from_edges(g.num_nodes, out.train_edges);
  return out;
}

namespace {

// Largest-remainder apportionment of `target` units over per-class shares
// n_c*num/den, each capped by cap[c]. Ties broken by lower class id.
std::vector<int> apportion(const std::vector<int>& class_sizes, const std::vector<int>& cap,
                           int num, int den, int target) {
  const int C = static_cast<int>(class_sizes.size());
  std::vector<int> take(C, 0);
  std::vector<std::pair<double, int>> rem;  // (-fraction, class) for stable sort
  int assigned = 0;
  for (int c = 0; c < C; ++c) {
    const double exact = static_cast<double>(class_sizes[c]) * num / den;
    take[c] = std::min(static_cast<int>(exact), cap[c]);
    assigned += take[c];
    rem.emplace_back(-(exact - static_cast<int>(exact)), c);
  }
  std::sort(rem.begin(), rem.end());
  size_t k = 0;
  while (assigned < target && k < rem.size() * 4) {
    const int c = rem[k % rem.size()].second;
    if (take[c] < cap[c]) {
      ++take[c];
      ++assigned;
    }
    ++k;
  }
  return take;
}

}  // namespace

NodeSplit split_nodes(const DiGraph& g, std::array<int, 3> ratio, uint64_t seed) {
  if (!g.has_labels()) throw ConfigError("split_nodes: graph has no labels");
  for (int r : ratio)
    if (r <= 0) throw ConfigError("split_nodes: ratio entries must be positive");
  const int T = ratio[0] + ratio[1] + ratio[2];
  const int n = g.num_nodes;
  const int val_target = static_cast<int>(static_cast<long long>(n) * ratio[1] / T);
  const int test_target = static_cast<int>(static_cast<long long>(n) * ratio[2] / T);

  std::vector<std::vector<int>> by_class(g.num_classes);
  for (int i = 0; i < n; ++i) by_class[g.labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<int> sizes(g.num_classes), cap(g.num_classes);
  for (int c = 0; c < g.num_classes; ++c) {
    if (by_class[c].size() < 5)
      std::cerr << "warning: class " << c << " has only " << by_class[c].size()
                << " nodes; best-effort split\n";
    shuffle_vec(by_class[c], rng);
    sizes[c] = cap[c] = static_cast<int>(by_class[c].size());
  }

  std::vector<int> val_take = apportion(sizes, cap, ratio[1], T, val_target);
  std::vector<int> cap2(g.num_classes);
  for (int c = 0; c < g.num_classes; ++c) cap2[c] = sizes[c] - val_take[c];
  std::vector<int> test_take = apportion(sizes, cap2, ratio[2], T, test_target);

  NodeSplit out;
  for (int c = 0; c < g.num_classes; ++c) {
    const auto& ids = by_class[c];
    int k = 0;
    for (int j = 0; j < val_take[c]; ++j) out.val_nodes.push_back(ids[k++]);
    for (int j = 0; j < test_take[c]; ++j) out.test_nodes.push_back(ids[k++]);
    for (; k < sizes[c]; ++k) out.train_nodes.push_back(ids[k]);
  }
  std::sort(out.train_nodes.begin(), out.train_nodes.end());
  std::sort(out.val_nodes.begin(), out.val_nodes.end());
  std::sort(out.test_nodes.begin(), out.test_nodes.end());
  return out;
}

SampleBatch sample_batch(const LinkSplit& split, const DiGraph& full_graph, double x,
                         uint64_t seed) {
  if (x < 0.0 || x > 1.0) throw ConfigError("sample_batch: negative-sample ratio x must be in [0,1]");
  const DiGraph& tg = split.train_graph;

  std::vector<Edge> uni, bid;  // bid holds one canonical (u<v) pair per cycle
  for (const auto& [u, v] : tg.edges) {
    if (tg.has_edge(v, u)) {
      if (u < v) bid.emplace_back(u, v);
    } else {
      uni.emplace_back(u, v);
    }
  }

  std::mt19937_64 rng(seed);
  const int n_f = static_cast<int>(uni.size());
  int n_b = static_cast<int>(bid.size());
  if (n_b > n_f) {
    shuffle_vec(bid, rng);
    n_b = n_f;
  }
  const int n_neg = static_cast<int>(static_cast<double>(n_f) * x);

  SampleBatch batch;
  batch.samples.reserve(static_cast<size_t>(2) * n_f + n_b + n_neg);
  for (const auto& [u, v] : uni) batch.samples.push_back({u, v, Relation::Forward});
  for (const auto& [u, v] : uni) batch.samples.push_back({v, u, Relation::Reverse});
  for (int i = 0; i < n_b; ++i) batch.samples.push_back({bid[i].first, bid[i].second, Relation::Bidirectional});

  const int n = full_graph.num_nodes;
  long long rejections = 0;
  for (int i = 0; i < n_neg; ++i) {
    for (;;) {
      const int u = static_cast<int>(bounded_rand(rng, n));
      const int v = static_cast<int>(bounded_rand(rng, n));
      if (u != v && !full_graph.has_edge(u, v) && !full_graph.has_edge(v, u)) {
        batch.samples.push_back({u, v, Relation::NoEdge});
        break;
      }
      if (++rejections > 1000000)
        throw std::runtime_error("sample_batch: graph too dense for non-edge rejection sampling");
    }
  }
  batch.counts = {n_f, n_f, n_b, n_neg};
  return batch;
}

DiGraph induced_subgraph(const DiGraph& g, const std::vector<int>& nodes,
                         std::vector<int>* old_to_new) {
  std::vector<int> map(g.num_nodes, -1);
  for (size_t i = 0; i < nodes.size(); ++i) {
    const int u = nodes[i];
    if (u < 0 || u >= g.num_nodes) throw std::out_of_range("induced_subgraph: node id out of range");
    if (map[u] != -1) throw std::invalid_argument("induced_subgraph: duplicate node id");
    map[u] = static_cast<int>(i);
  }
  DiGraph sub;
  sub.num_nodes = static_cast<int>(nodes.size());
  for (const auto& [u, v] : g.edges)
    if (map[u] != -1 && map[v] != -1) sub.edges.emplace_back(map[u], map[v]);
  sub.rebuild_adjacency();
  if (g.has_features()) {
    sub.features = Matrix(sub.num_nodes, g.features.cols);
    for (size_t i = 0; i < nodes.size(); ++i)
      std::copy(g.features.row(nodes[i]), g.features.row(nodes[i]) + g.features.cols,
                sub.features.row(static_cast<int>(i)));
  }
  if (g.has_labels()) {
    sub.labels.resize(sub.num_nodes);
    for (size_t i = 0; i < nodes.size(); ++i) sub.labels[i] = g.labels[nodes[i]];
    sub.num_classes = g.num_classes;
  }
  if (old_to_new) *old_to_new = std::move(map);
  return sub;
}

namespace {

void write_edge_file(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (const auto& [u, v] : edges) out << u << " " << v << "\n";
}

std::vector<Edge> read_edge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<Edge> edges;
  int u, v;
  while (in >> u >> v) edges.emplace_back(u, v);
  return edges;
}

void write_id_file(const std::string& path, const std::vector<int>& ids) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (int id : ids) out << id << "\n";
}

std::vector<int> read_id_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<int> ids;
  int id;
  while (in >> id) ids.push_back(id);
  return ids;
}

}  // namespace

void save_link_split(const LinkSplit& split, const std::string& dir, uint64_t seed,
                     std::array<int, 3> ratio) {
  fs::create_directories(dir);
  write_edge_file(dir + "/train_edges.txt", split.train_edges);
  write_edge_file(dir + "/val_edges.txt", split.val_edges);
  write_edge_file(dir + "/test_edges.txt", split.test_edges);
  json manifest = {
      {"seed", seed},
      {"ratio", {ratio[0], ratio[1], ratio[2]}},
      {"counts",
       {{"train", split.train_edges.size()},
        {"val", split.val_edges.size()},
        {"test", split.test_edges.size()}}},
  };
  std::ofstream out(dir + "/split.json");
  out << manifest.dump(2) << "\n";
}

LinkSplit load_link_split(const std::string& dir, const DiGraph& full_graph) {
  LinkSplit split;
  split.train_edges = read_edge_file(dir + "/train_edges.txt");
  split.val_edges = read_edge_file(dir + "/val_edges.txt");
  split.test_edges = read_edge_file(dir + "/test_edges.txt");
  std::ifstream mf(dir + "/split.json");
  if (mf) {
    json manifest = json::parse(mf);
    const auto& c = manifest.at("counts");
    if (c.at("train").get<size_t>() != split.train_edges.size() ||
        c.at("val").get<size_t>() != split.val_edges.size() ||
        c.at("test").get<size_t>() != split.test_edges.size())
      throw ParseError(dir + "/split.json: counts do not match edge files");
  }
  split.train_graph = DiGraph::from_edges(full_graph.num_nodes, split.train_edges);
  return split;
}

void save_node_split(const NodeSplit& split, const std::string& dir, uint64_t seed,
                     std::array<int, 3> ratio) {
  fs::create_directories(dir);
  write_id_file(dir + "/train_nodes.txt", split.train_nodes);
  write_id_file(dir + "/val_nodes.txt", split.val_nodes);
  write_id_file(dir + "/test_nodes.txt", split.test_nodes);
  json manifest = {
      {"seed", seed},
      {"ratio", {ratio[0], ratio[1], ratio[2]}},
      {"counts",
       {{"train", split.train_nodes.size()},
        {"val", split.val_nodes.size()},
        {"test", split.test_nodes.size()}}},
  };
  std::ofstream out(dir + "/node_split.json");
  out << manifest.dump(2) << "\n";
}

NodeSplit load_node_split(const std::string& dir, const DiGraph& full_graph) {
  NodeSplit split;
  split.train_nodes = read_id_file(dir + "/train_nodes.txt");
  split.val_nodes = read_id_file(dir + "/val_nodes.txt");
  split.test_nodes = read_id_file(dir + "/test_nodes.txt");
  for (const auto* part : {&split.train_nodes, &split.val_nodes, &split.test_nodes})
    for (int id : *part)
      if (id < 0 || id >= full_graph.num_nodes)
        throw ParseError(dir + ": node id out of range in split files");
  return split;
}

}  // namespace duplex
