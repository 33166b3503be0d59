#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "duplex/graph.hpp"
#include "duplex/objective.hpp"
#include "duplex/trainer.hpp"

namespace duplex {

// The four link-prediction subtasks: existence, direction, three-type and
// four-type classification.
enum class Subtask { EP, DP, TP, FP };

Subtask subtask_from_string(const std::string& s);
const char* subtask_name(Subtask t);

// Class-label conventions per subtask:
//   EP: 1 = edge exists, 0 = non-existent (reversed or sampled non-edge)
//   DP: 1 = forward, 0 = reverse
//   TP: 0 = forward, 1 = reverse, 2 = non-existent
//   FP: 0 = forward, 1 = reverse, 2 = bidirectional, 3 = non-existent
struct LabeledPair {
  int u, v;
  int label;
};

struct MetricReport {
  bool has_auc = false;
  double auc = 0.0;
  double acc = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::vector<std::vector<long long>> confusion;
  int n_samples = 0;
  bool empty = false;  // set for empty strata instead of erroring

  std::string to_json() const;
};

// Builds the labeled pair set for a subtask from the held-out test edges;
// relation types are read off the full graph, and non-edge negatives are
// sampled from it. Ratios follow the subtask definition with bidirectional
// capped at availability.
std::vector<LabeledPair> build_subtask_testset(const LinkSplit& split, const DiGraph& full_graph,
                                               Subtask kind, uint64_t seed);

// Scores pairs with the parameter-free decoders: EP uses P(fwd)+P(bid) over
// all four prototypes, DP uses P(fwd) restricted to {fwd, rev}; TP/FP take
// the argmax over their restricted prototype sets. AUC is the Mann-Whitney
// rank statistic (ties count 0.5); binary ACC thresholds at 0.5.
MetricReport score_subtask(const EmbeddingMatrices& emb, const std::vector<LabeledPair>& pairs,
                           Subtask kind, Distance distance);

// Rank-based AUC over (score, binary label); ties contribute 0.5.
double auc_rank(std::span<const double> scores, std::span<const int> labels);

struct StratumResult {
  int threshold = 0;
  MetricReport report;
};

// Per-threshold EP AUC over pairs whose source out-degree or target
// in-degree (in `graph`) is <= t. Empty or single-class strata are flagged,
// not errors.
std::vector<StratumResult> degree_stratified_auc(const EmbeddingMatrices& emb,
                                                 const std::vector<LabeledPair>& ep_pairs,
                                                 const DiGraph& graph,
                                                 std::span<const int> thresholds,
                                                 Distance distance);

void write_strata_csv(std::ostream& out, const std::vector<StratumResult>& strata);

struct ProbeConfig {
  int hidden = 128;
  double dropout = 0.5;
  double lr = 1e-2;
  int max_epochs = 3000;
  int patience = 50;
  int eval_every = 5;
};

// Trains a two-layer MLP on the frozen concatenated embeddings [a; theta]
// and reports test macro/micro F1. Never touches encoder parameters.
MetricReport transductive_probe(const EmbeddingMatrices& emb, const DiGraph& g,
                                const NodeSplit& split, const ProbeConfig& cfg, uint64_t seed);

// Inductive node classification: trains encoder plus linear head on the
// subgraph induced by train+val nodes (test nodes and their edges removed),
// then encodes the full graph once and scores the test nodes.
MetricReport inductive_protocol(const DiGraph& g, const NodeSplit& split,
                                const EncoderConfig& ecfg, const TrainConfig& tcfg,
                                uint64_t seed);

// (macro, micro) F1 from a square confusion matrix (rows = truth,
// cols = prediction); per-class 0/0 counts as 0.
std::pair<double, double> f1_scores(const std::vector<std::vector<long long>>& confusion);

}  // namespace duplex
