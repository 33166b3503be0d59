#pragma once

#include <array>
#include <span>

#include "duplex/encoder.hpp"
#include "duplex/graph.hpp"
#include "duplex/tensor.hpp"

namespace duplex {

// The reconstructed matrix entry for an ordered pair: re + i*im, where
// re = sum_k a_u[k] a_v[k] cos(pi/2 (th_u[k]-th_v[k])) and im the sin analog.
struct ComplexScore {
  double re = 0.0;
  double im = 0.0;
};

enum class Distance { L1, L2 };

enum class DecayMode { LiteralPower, ComplementPower };

// Connection-loss weight schedule: literal-power gives lambda0 * q^k (with
// 0^0 = 1), complement-power gives lambda0 * (1-q)^k. Complement-power is the
// default; q is then a per-epoch decay *rate*, so q=0 means constant weight.
struct LossSchedule {
  double lambda0 = 1.0;
  double q = 0.0;
  DecayMode mode = DecayMode::ComplementPower;
};

double lambda_at(const LossSchedule& schedule, int epoch);

ComplexScore hermitian_score(const Matrix& amplitude, const Matrix& phase, int u, int v);

// P(r) = exp(-dist(score, prototype_r)) normalized over `restrict`.
// Entries outside `restrict` are 0. Indexed by Relation.
std::array<double, 4> direction_probs(const ComplexScore& score, Distance distance,
                                      std::span<const Relation> restrict);
std::array<double, 4> direction_probs(const ComplexScore& score, Distance distance);

// Differentiable batched scores for the sample pairs: two B x 1 tensors.
struct ScoreBatch {
  Tensor re, im;
};
ScoreBatch hermitian_score_batch(Tape& tape, const ComplexEmbedding& emb,
                                 std::span<const EdgeSample> samples);

// Mean negative log-likelihood of each sample's relation under the
// distance-softmax over all four prototypes.
Tensor direction_loss(Tape& tape, const ComplexEmbedding& emb, std::span<const EdgeSample> samples,
                      Distance distance);

// Mean binary cross-entropy of sigmoid(a_u . a_v) against edge existence
// (NoEdge -> 0, everything else -> 1). Touches amplitudes only.
Tensor connection_loss(Tape& tape, const ComplexEmbedding& emb,
                       std::span<const EdgeSample> samples);

struct LossParts {
  Tensor total, direction, connection;
  double lambda = 0.0;
};

LossParts total_loss(Tape& tape, const ComplexEmbedding& emb, std::span<const EdgeSample> samples,
                     const LossSchedule& schedule, int epoch, Distance distance);

// Mean softmax cross-entropy over rows of `logits` (n x C).
Tensor supervised_ce_loss(Tape& tape, const Tensor& logits, std::span<const int> labels);

// Telemetry: mean squared complex deviation |score(u,v) - prototype|^2 over
// the sample pairs (not differentiated).
double ham_mse(const Matrix& amplitude, const Matrix& phase, std::span<const EdgeSample> samples);

}  // namespace duplex
