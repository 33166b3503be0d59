#include "duplex/objective.hpp"

#include <cmath>
#include <numbers>

namespace duplex {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double proto_dist(const ComplexScore& s, Relation r, Distance distance) {
  const auto p = relation_prototype(r);
  const double dre = s.re - p.real(), dim = s.im - p.imag();
  if (distance == Distance::L1) return std::fabs(dre) + std::fabs(dim);
  return std::sqrt(dre * dre + dim * dim);
}

}  // namespace

double lambda_at(const LossSchedule& schedule, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lambda_at: epoch must be >= 0");
  if (schedule.lambda0 < 0) throw ConfigError("lambda_at: lambda0 must be >= 0");
  if (schedule.mode == DecayMode::ComplementPower) {
    if (schedule.q < 0.0 || schedule.q >= 1.0)
      throw ConfigError("lambda_at: decay rate q must be in [0,1) for complement-power mode");
    return schedule.lambda0 * std::pow(1.0 - schedule.q, epoch);
  }
  if (schedule.q < 0.0 || schedule.q > 1.0)
    throw ConfigError("lambda_at: q must be in [0,1] for literal-power mode");
  if (epoch == 0) return schedule.lambda0;  // 0^0 = 1
  return schedule.lambda0 * std::pow(schedule.q, epoch);
}

ComplexScore hermitian_score(const Matrix& amplitude, const Matrix& phase, int u, int v) {
  if (u < 0 || u >= amplitude.rows || v < 0 || v >= amplitude.rows)
    throw std::out_of_range("hermitian_score: node id out of range");
  ComplexScore s;
  const int d = amplitude.cols;
  for (int k = 0; k < d; ++k) {
    const double prod = amplitude.at(u, k) * amplitude.at(v, k);
    const double dth = kHalfPi * (phase.at(u, k) - phase.at(v, k));
    s.re += prod * std::cos(dth);
    s.im += prod * std::sin(dth);
  }
  return s;
}

std::array<double, 4> direction_probs(const ComplexScore& score, Distance distance,
                                      std::span<const Relation> restrict) {
  if (restrict.empty()) throw std::invalid_argument("direction_probs: empty prototype set");
  std::array<double, 4> probs{0.0, 0.0, 0.0, 0.0};
  double min_dist = std::numeric_limits<double>::infinity();
  std::array<double, 4> dist{0, 0, 0, 0};
  for (Relation r : restrict) {
    dist[static_cast<int>(r)] = proto_dist(score, r, distance);
    min_dist = std::min(min_dist, dist[static_cast<int>(r)]);
  }
  double z = 0.0;
  for (Relation r : restrict) {
    const int k = static_cast<int>(r);
    probs[k] = std::exp(-(dist[k] - min_dist));
    z += probs[k];
  }
  for (Relation r : restrict) probs[static_cast<int>(r)] /= z;
  return probs;
}

std::array<double, 4> direction_probs(const ComplexScore& score, Distance distance) {
  static constexpr Relation all[4] = {Relation::Forward, Relation::Reverse,
                                      Relation::Bidirectional, Relation::NoEdge};
  return direction_probs(score, distance, all);
}

ScoreBatch hermitian_score_batch(Tape& tape, const ComplexEmbedding& emb,
                                 std::span<const EdgeSample> samples) {
  if (samples.empty()) throw std::invalid_argument("hermitian_score_batch: empty batch");
  std::vector<int> us, vs;
  us.reserve(samples.size());
  vs.reserve(samples.size());
  for (const auto& s : samples) {
    us.push_back(s.u);
    vs.push_back(s.v);
  }
  Tensor au = tape.row_gather(emb.amplitude, us);
  Tensor av = tape.row_gather(emb.amplitude, vs);
  Tensor tu = tape.row_gather(emb.phase, us);
  Tensor tv = tape.row_gather(emb.phase, vs);
  Tensor prod = tape.hadamard(au, av);
  Tensor dth = tape.scalar_mul(tape.sub(tu, tv), kHalfPi);
  ScoreBatch out;
  out.re = tape.row_sum(tape.hadamard(prod, tape.cos(dth)));
  out.im = tape.row_sum(tape.hadamard(prod, tape.sin(dth)));
  return out;
}

namespace {

// dist(score, prototype r) as a B x 1 tensor.
Tensor proto_dist_batch(Tape& tape, const ScoreBatch& s, Relation r, Distance distance) {
  const auto p = relation_prototype(r);
  const int B = s.re.rows();
  Tensor dre = tape.sub(s.re, Tensor::full(B, 1, p.real()));
  Tensor dim = tape.sub(s.im, Tensor::full(B, 1, p.imag()));
  if (distance == Distance::L1) return tape.add(tape.abs(dre), tape.abs(dim));
  // Relu'd amplitudes can hit a prototype exactly; flooring the squared norm
  // keeps sqrt's backward finite there (zero, matching abs's subgradient).
  Tensor sq = tape.add(tape.hadamard(dre, dre), tape.hadamard(dim, dim));
  return tape.sqrt(tape.add(sq, Tensor::full(B, 1, 1e-300)));
}

// Row-stable log(sum_j exp(x_ij)) as a B x 1 tensor; the per-row shift is a
// detached constant, which leaves the gradient unchanged.
Tensor logsumexp_rows(Tape& tape, const Tensor& x) {
  const int B = x.rows(), C = x.cols();
  std::vector<double> mx(B, -std::numeric_limits<double>::infinity());
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < C; ++j) mx[i] = std::max(mx[i], x.at(i, j));
  Tensor neg_shift = Tensor::from(mx, B, 1, false);
  Tensor shifted = tape.add_colvec(x, tape.scalar_mul(neg_shift, -1.0));
  Tensor lse = tape.log(tape.row_sum(tape.exp(shifted)));
  return tape.add(lse, neg_shift);
}

}  // namespace

Tensor direction_loss(Tape& tape, const ComplexEmbedding& emb, std::span<const EdgeSample> samples,
                      Distance distance) {
  ScoreBatch s = hermitian_score_batch(tape, emb, samples);
  const int B = static_cast<int>(samples.size());
  Tensor d0 = proto_dist_batch(tape, s, Relation::Forward, distance);
  Tensor d1 = proto_dist_batch(tape, s, Relation::Reverse, distance);
  Tensor d2 = proto_dist_batch(tape, s, Relation::Bidirectional, distance);
  Tensor d3 = proto_dist_batch(tape, s, Relation::NoEdge, distance);
  Tensor dists = tape.concat_cols(tape.concat_cols(d0, d1), tape.concat_cols(d2, d3));

  std::vector<double> onehot(static_cast<size_t>(B) * 4, 0.0);
  for (int i = 0; i < B; ++i) onehot[static_cast<size_t>(i) * 4 + static_cast<int>(samples[i].rel)] = 1.0;
  Tensor mask = Tensor::from(std::move(onehot), B, 4, false);

  // NLL = dist_label + log sum_r exp(-dist_r)
  Tensor d_label = tape.row_sum(tape.hadamard(dists, mask));
  Tensor lse = logsumexp_rows(tape, tape.scalar_mul(dists, -1.0));
  return tape.mean_all(tape.add(d_label, lse));
}

Tensor connection_loss(Tape& tape, const ComplexEmbedding& emb,
                       std::span<const EdgeSample> samples) {
  if (samples.empty()) throw std::invalid_argument("connection_loss: empty batch");
  std::vector<int> us, vs;
  std::vector<double> y;
  us.reserve(samples.size());
  vs.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& smp : samples) {
    us.push_back(smp.u);
    vs.push_back(smp.v);
    y.push_back(smp.rel == Relation::NoEdge ? 0.0 : 1.0);
  }
  const int B = static_cast<int>(samples.size());
  Tensor au = tape.row_gather(emb.amplitude, us);
  Tensor av = tape.row_gather(emb.amplitude, vs);
  Tensor s = tape.row_sum(tape.hadamard(au, av));
  Tensor yt = Tensor::from(std::move(y), B, 1, false);
  // Stable BCE-with-logits: relu(s) - s*y + log(1 + exp(-|s|)).
  Tensor soft = tape.log(tape.add(Tensor::full(B, 1, 1.0),
                                  tape.exp(tape.scalar_mul(tape.abs(s), -1.0))));
  Tensor per = tape.add(tape.sub(tape.relu(s), tape.hadamard(s, yt)), soft);
  return tape.mean_all(per);
}

LossParts total_loss(Tape& tape, const ComplexEmbedding& emb, std::span<const EdgeSample> samples,
                     const LossSchedule& schedule, int epoch, Distance distance) {
  LossParts parts;
  parts.lambda = lambda_at(schedule, epoch);
  parts.direction = direction_loss(tape, emb, samples, distance);
  parts.connection = connection_loss(tape, emb, samples);
  parts.total = parts.lambda == 0.0
                    ? parts.direction
                    : tape.add(parts.direction, tape.scalar_mul(parts.connection, parts.lambda));
  return parts;
}

Tensor supervised_ce_loss(Tape& tape, const Tensor& logits, std::span<const int> labels) {
  const int B = logits.rows(), C = logits.cols();
  if (static_cast<int>(labels.size()) != B)
    throw std::invalid_argument("supervised_ce_loss: label count does not match rows");
  std::vector<double> onehot(static_cast<size_t>(B) * C, 0.0);
  for (int i = 0; i < B; ++i) {
    if (labels[i] < 0 || labels[i] >= C)
      throw std::out_of_range("supervised_ce_loss: label out of range");
    onehot[static_cast<size_t>(i) * C + labels[i]] = 1.0;
  }
  Tensor mask = Tensor::from(std::move(onehot), B, C, false);
  Tensor z_label = tape.row_sum(tape.hadamard(logits, mask));
  Tensor lse = logsumexp_rows(tape, logits);
  return tape.mean_all(tape.sub(lse, z_label));
}

double ham_mse(const Matrix& amplitude, const Matrix& phase, std::span<const EdgeSample> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& smp : samples) {
    const ComplexScore s = hermitian_score(amplitude, phase, smp.u, smp.v);
    const auto p = relation_prototype(smp.rel);
    const double dre = s.re - p.real(), dim = s.im - p.imag();
    acc += dre * dre + dim * dim;
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace duplex
