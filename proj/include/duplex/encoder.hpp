#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duplex/graph.hpp"
#include "duplex/tensor.hpp"

namespace duplex {

// Node embeddings kept in polar split form: the complex embedding is
// x_u = a_u * exp(i*pi/2 * theta_u) and its conjugate is the target-side
// embedding; neither is ever materialized as complex numbers.
struct ComplexEmbedding {
  Tensor amplitude;  // n x d
  Tensor phase;      // n x d
};

enum class Backbone { GAT, GCN };
// Where the cross-embedding fusion aggregation replaces the plain layers;
// EWS is the cheap element-wise-sum variant applied at every layer.
enum class Fusion { None, Early, Mid, Late, All, EWS };
// Normalization set for phase attention: one softmax over the whole
// neighborhood (default) or separate softmaxes per sign group.
enum class PhaseNorm { Union, PerSign };
enum class InitMode { RandomNormal, Features };

struct EncoderConfig {
  int layers = 3;
  std::vector<int> dims;  // size layers+1; dims[0] = input dim
  Backbone backbone = Backbone::GAT;
  Fusion fusion = Fusion::None;
  PhaseNorm phase_norm = PhaseNorm::Union;
  double dropout = 0.5;
  double leaky_slope = 0.2;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  void validate() const;
  // 1-based layer indices at which fusion replaces the plain layers.
  std::vector<int> fusion_layers() const;
};

// Flattened neighborhood index shared by all layers of one graph.
// Union arrays cover N(u) = {u} + in(u) + out(u), one entry per distinct
// neighbor, ordered by aggregating node (dst is non-decreasing). phase_sign
// is +1 for in-or-self, -1 for out-only, 0 for bidirectional (the two signed
// occurrences cancel). The in_/out_ arrays hold the per-sign split used by
// the PerSign phase normalization (self counts as an in-neighbor).
struct AggIndex {
  int num_nodes = 0;
  std::vector<int> dst, src;
  std::vector<double> phase_sign;
  std::vector<int> in_dst, in_src;
  std::vector<int> out_dst, out_src;

  static AggIndex build(const DiGraph& g);
};

struct AttnParams {
  Tensor W;  // d_in x d_out
  Tensor b;  // 2*d_out x 1 attention vector (GAT only; undefined for GCN)
};

struct LayerParams {
  AttnParams amp, phase;
  // Cross-aggregation parameter groups, allocated only at fusion layers.
  std::optional<AttnParams> amp_from_phase, phase_from_amp;
  // Element-wise-sum mixing maps (d_out x d_out), allocated in EWS mode.
  Tensor ews_amp_from_phase, ews_phase_from_amp;
};

struct HeadParams {
  Tensor W;
  Tensor b;  // 1 x out
};

struct EncoderParams {
  std::vector<LayerParams> layers;
  std::optional<HeadParams> edge_head;  // 4d -> 4 relation classes
  std::optional<HeadParams> node_head;  // 2d -> C label classes

  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> all() const;
  size_t param_count() const;
};

EncoderParams init_params(const EncoderConfig& cfg, uint64_t seed, int edge_head_classes = 0,
                          int node_head_classes = 0);

// Fixed (non-trainable) initial inputs: i.i.d. standard normal draws for
// both amplitude and phase, or the node feature matrix for both.
ComplexEmbedding init_embeddings(const DiGraph& g, int d, InitMode mode, uint64_t seed);

// Softmax within each contiguous segment of a sorted id vector; logits is
// E x 1. Rows of the result sum to 1 over every non-empty segment.
Tensor segment_softmax(Tape& tape, const Tensor& logits, std::span<const int> seg,
                       int num_segments);

// One aggregation pass: messages W*x_v weighted by attention (GAT) or by 1
// (GCN), summed into each dst node; `sign` (may be empty) scales each entry,
// carrying the phase in-minus-out structure.
Tensor aggregate(Tape& tape, const Tensor& x_in, const AttnParams& p, std::span<const int> dst,
                 std::span<const int> src, std::span<const double> sign, int num_nodes,
                 Backbone backbone, double leaky_slope);

Tensor amplitude_layer(Tape& tape, const Tensor& a_in, const AggIndex& idx, const AttnParams& p,
                       Backbone backbone, double leaky_slope);
Tensor phase_layer(Tape& tape, const Tensor& theta_in, const AggIndex& idx, const AttnParams& p,
                   Backbone backbone, double leaky_slope, PhaseNorm norm);
// GCN-backbone layer: attention replaced by constant 1 (unnormalized sums);
// signed=true applies the phase in-minus-out signs.
Tensor gcn_layer(Tape& tape, const Tensor& x_in, const AggIndex& idx, const AttnParams& p,
                 bool sign_split);

// Cross-embedding fusion replacing both plain layers (each side aggregates
// its own embedding plus the other embedding through separate parameters).
std::pair<Tensor, Tensor> fusion_step(Tape& tape, const Tensor& a_in, const Tensor& theta_in,
                                      const AggIndex& idx, const LayerParams& lp,
                                      const EncoderConfig& cfg);

ComplexEmbedding encode(Tape& tape, const AggIndex& idx, const ComplexEmbedding& init,
                        const EncoderConfig& cfg, const EncoderParams& params, bool training,
                        uint64_t dropout_seed);

// Linear relation classifier on [a_u; theta_u; a_v; theta_v].
Tensor head_edge_classifier(Tape& tape, const ComplexEmbedding& emb, std::span<const EdgeSample> pairs,
                            const HeadParams& head);
// Linear label classifier on [a_u; theta_u].
Tensor head_node_classifier(Tape& tape, const ComplexEmbedding& emb, const HeadParams& head);

}  // namespace duplex
