#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "duplex/common.hpp"

namespace duplex {

using Edge = std::pair<int, int>;

// The four pairwise relations a directed graph induces on an ordered node
// pair, together with their fixed complex prototypes.
enum class Relation : int { Forward = 0, Reverse = 1, Bidirectional = 2, NoEdge = 3 };

inline std::complex<double> relation_prototype(Relation r) {
  switch (r) {
    case Relation::Forward: return {0.0, 1.0};
    case Relation::Reverse: return {0.0, -1.0};
    case Relation::Bidirectional: return {1.0, 0.0};
    case Relation::NoEdge: return {0.0, 0.0};
  }
  throw std::invalid_argument("relation_prototype: bad relation");
}

const char* relation_name(Relation r);

struct HamEntry {
  Relation rel;
  std::complex<double> prototype;
};

struct DiGraph {
  int num_nodes = 0;
  std::vector<Edge> edges;                // deduplicated, no self-loops
  std::vector<std::vector<int>> in_adj;   // sorted ascending
  std::vector<std::vector<int>> out_adj;  // sorted ascending

  Matrix features;          // num_nodes x f when present, else 0x0
  std::vector<int> labels;  // per-node class id when present, else empty
  int num_classes = 0;

  bool has_features() const { return features.rows == num_nodes && num_nodes > 0; }
  bool has_labels() const { return static_cast<int>(labels.size()) == num_nodes && num_nodes > 0; }
  bool has_edge(int u, int v) const;
  int out_degree(int u) const { return static_cast<int>(out_adj[u].size()); }
  int in_degree(int u) const { return static_cast<int>(in_adj[u].size()); }

  // Rebuild in_adj/out_adj from `edges`; sorts, deduplicates, drops self-loops.
  // Returns the number of dropped duplicate/self-loop entries.
  int rebuild_adjacency();

  static DiGraph from_edges(int num_nodes, std::vector<Edge> edges);
};

// Edge-list text file: "src<ws>dst" per line, '#' starts a comment line.
// Without num_nodes, ids are remapped to dense 0..n-1 in sorted-id order;
// with num_nodes, ids are kept as-is and bounds-checked against it.
DiGraph load_edge_list(const std::string& path, std::optional<int> num_nodes = std::nullopt);

// CSV rows "node_id,label,f_1,...,f_f"; every node must appear exactly once.
void load_features_labels(const std::string& path, DiGraph& g);

HamEntry ham_lookup(const DiGraph& g, int u, int v);

struct LinkSplit {
  std::vector<Edge> train_edges, val_edges, test_edges;
  DiGraph train_graph;  // adjacency over train edges only (no features)
};

// Uniform random partition of the edge list. Boundaries are cumulative
// floors: with total T = a+b+c, train gets floor(E*a/T) edges and
// train+val gets floor(E*(a+b)/T); the remainder is test.
LinkSplit split_edges(const DiGraph& g, std::array<int, 3> ratio, uint64_t seed);

struct NodeSplit {
  std::vector<int> train_nodes, val_nodes, test_nodes;
};

// Stratified-by-label partition. Global val/test targets are floor(n*b/T)
// and floor(n*c/T); per-class counts come from largest-remainder rounding of
// the proportional shares, so class balance is preserved up to one node.
NodeSplit split_nodes(const DiGraph& g, std::array<int, 3> ratio, uint64_t seed);

struct EdgeSample {
  int u, v;
  Relation rel;
};

struct SampleBatch {
  std::vector<EdgeSample> samples;
  std::array<int, 4> counts{0, 0, 0, 0};  // indexed by Relation
};

// Draws the per-epoch training pairs from the train graph at ratio
// 1 : 1 : 1 : x over Forward / Reverse / Bidirectional / NoEdge, where the
// Forward count is the number of unidirectional train edges, Reverse pairs
// are their transposes, Bidirectional is capped at availability, and NoEdge
// pairs are rejection-sampled from ordered pairs non-adjacent in the *full*
// graph (so held-out edges are never used as negatives).
SampleBatch sample_batch(const LinkSplit& split, const DiGraph& full_graph, double x,
                         uint64_t seed);

// Subgraph over `nodes` (ids remapped to 0..k-1 in the given order), copying
// features/labels rows. Optionally emits the old->new id map (-1 = dropped).
DiGraph induced_subgraph(const DiGraph& g, const std::vector<int>& nodes,
                         std::vector<int>* old_to_new = nullptr);

// Split persistence: three edge-list files plus split.json
// {"seed":..., "ratio":[a,b,c], "counts":{"train":...,"val":...,"test":...}}.
void save_link_split(const LinkSplit& split, const std::string& dir, uint64_t seed,
                     std::array<int, 3> ratio);
LinkSplit load_link_split(const std::string& dir, const DiGraph& full_graph);

// Node-split persistence: three node-id files plus node_split.json.
void save_node_split(const NodeSplit& split, const std::string& dir, uint64_t seed,
                     std::array<int, 3> ratio);
NodeSplit load_node_split(const std::string& dir, const DiGraph& full_graph);

// Unbiased bounded draw / Fisher-Yates shuffle; pinned here (not std::shuffle)
// so sampled splits and batches reproduce bit-for-bit across toolchains.
uint64_t bounded_rand(std::mt19937_64& rng, uint64_t n);

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(bounded_rand(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace duplex
