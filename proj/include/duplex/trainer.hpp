#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "duplex/encoder.hpp"
#include "duplex/graph.hpp"
#include "duplex/objective.hpp"

namespace duplex {

enum class TrainMode { SelfSupervised, SupervisedEdges, SupervisedNodes };

struct TrainConfig {
  int max_epochs = 3000;
  double lr = 1e-3;
  int patience = 50;    // epochs without improvement before stopping
  int eval_every = 5;   // validation cadence in epochs
  uint64_t seed = 0;
  TrainMode mode = TrainMode::SelfSupervised;
  LossSchedule schedule;
  Distance distance = Distance::L1;
  int batch_size = 0;      // 0 = full batch; otherwise loss-pair chunk size
  double neg_ratio = 1.0;  // x in the 1:1:1:x sampling ratio

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lambda = 0.0;
  double ham_mse = 0.0;
  long long wall_ms = 0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  void to_csv(std::ostream& out) const;
  static TrainLog from_csv(std::istream& in);
  // Equality of everything except wall_ms (timings are not reproducible).
  bool same_values(const TrainLog& other) const;
};

struct EmbeddingMatrices {
  Matrix amplitude, phase;
};

// Per-node CSV "id,a_1..a_d,theta_1..theta_d"; header names carry d.
// Values round-trip to full double precision.
void save_embeddings(const EmbeddingMatrices& emb, const std::string& path);
EmbeddingMatrices load_embeddings(const std::string& path);

struct TrainResult {
  EncoderParams params;       // best-validation parameters
  EmbeddingMatrices embedding;  // eval-mode encoding under those parameters
  TrainLog log;
  int best_epoch = -1;
  double best_val = 0.0;
};

struct TrainInputs {
  const DiGraph* full_graph = nullptr;    // always required
  const LinkSplit* link_split = nullptr;  // self-supervised / supervised-edges
  const NodeSplit* node_split = nullptr;  // supervised-nodes
};

// Runs the training loop: per epoch resample pairs (link modes), forward
// encode on the train graph, loss, backward, Adam; validates every
// eval_every epochs, keeps the best-validation parameters, and stops early
// after `patience` epochs without improvement. Optionally streams the log as
// CSV rows while running.
TrainResult train(const TrainInputs& inputs, const ComplexEmbedding& init,
                  const EncoderConfig& ecfg, EncoderParams params, const TrainConfig& tcfg,
                  std::ostream* csv_stream = nullptr);

// Telemetry pair set for reconstruction error: edge pairs of every relation
// plus matched non-edges, capped at `cap` samples.
std::vector<EdgeSample> telemetry_pairs(const DiGraph& g, uint64_t seed, int cap = 100000);

// Eval-mode (no dropout) encoding as plain matrices.
EmbeddingMatrices encode_eval(const DiGraph& g, const AggIndex& idx, const ComplexEmbedding& init,
                              const EncoderConfig& ecfg, const EncoderParams& params);

// Named-tensor checkpoint: <dir>/checkpoint.json manifest plus
// <dir>/checkpoint.bin raw little-endian doubles.
void save_checkpoint(const EncoderParams& params, const std::string& dir, uint64_t config_hash,
                     uint64_t seed);
// Loads into an already-allocated parameter struct; name/shape mismatches
// raise an error naming the offending tensors, a config-hash mismatch only
// warns.
void load_checkpoint(EncoderParams& params, const std::string& dir,
                     std::optional<uint64_t> expected_config_hash = std::nullopt);

}  // namespace duplex
