#include "duplex/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace duplex {

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
  if (static_cast<int>(dims.size()) != layers + 1)
    throw ConfigError("encoder: dims must list input plus one size per layer");
  for (int d : dims)
    if (d <= 0) throw ConfigError("encoder: dims must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
}

std::vector<int> EncoderConfig::fusion_layers() const {
  switch (fusion) {
    case Fusion::None:
    case Fusion::EWS: return {};
    case Fusion::Early: return {1};
    case Fusion::Mid: return {layers / 2 + 1};
    case Fusion::Late: return {layers};
    case Fusion::All: {
      std::vector<int> all(layers);
      for (int i = 0; i < layers; ++i) all[i] = i + 1;
      return all;
    }
  }
  return {};
}

AggIndex AggIndex::build(const DiGraph& g) {
  AggIndex idx;
  idx.num_nodes = g.num_nodes;
  for (int u = 0; u < g.num_nodes; ++u) {
    // Union neighborhood {u} + in(u) + out(u), each distinct neighbor once.
    std::vector<int> nbrs;
    nbrs.reserve(g.in_adj[u].size() + g.out_adj[u].size() + 1);
    nbrs.push_back(u);
    nbrs.insert(nbrs.end(), g.in_adj[u].begin(), g.in_adj[u].end());
    nbrs.insert(nbrs.end(), g.out_adj[u].begin(), g.out_adj[u].end());
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    for (int v : nbrs) {
      const bool is_in = v == u || g.has_edge(v, u);
      const bool is_out = v != u && g.has_edge(u, v);
      idx.dst.push_back(u);
      idx.src.push_back(v);
      idx.phase_sign.push_back(is_in && is_out ? 0.0 : (is_out ? -1.0 : 1.0));
    }
    idx.in_dst.push_back(u);
    idx.in_src.push_back(u);
    for (int v : g.in_adj[u]) {
      idx.in_dst.push_back(u);
      idx.in_src.push_back(v);
    }
    for (int v : g.out_adj[u]) {
      idx.out_dst.push_back(u);
      idx.out_src.push_back(v);
    }
  }
  return idx;
}

namespace {

AttnParams make_attn(const EncoderConfig& cfg, int d_in, int d_out, std::mt19937_64& rng) {
  AttnParams p;
  p.W = Tensor::glorot(d_in, d_out, rng, true);
  if (cfg.backbone == Backbone::GAT) p.b = Tensor::glorot(2 * d_out, 1, rng, true);
  return p;
}

}  // namespace

EncoderParams init_params(const EncoderConfig& cfg, uint64_t seed, int edge_head_classes,
                          int node_head_classes) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  EncoderParams params;
  const auto fusion_at = cfg.fusion_layers();
  for (int l = 1; l <= cfg.layers; ++l) {
    const int d_in = cfg.dims[l - 1], d_out = cfg.dims[l];
    LayerParams lp;
    lp.amp = make_attn(cfg, d_in, d_out, rng);
    lp.phase = make_attn(cfg, d_in, d_out, rng);
    if (std::find(fusion_at.begin(), fusion_at.end(), l) != fusion_at.end()) {
      lp.amp_from_phase = make_attn(cfg, d_in, d_out, rng);
      lp.phase_from_amp = make_attn(cfg, d_in, d_out, rng);
    }
    if (cfg.fusion == Fusion::EWS) {
      lp.ews_amp_from_phase = Tensor::glorot(d_out, d_out, rng, true);
      lp.ews_phase_from_amp = Tensor::glorot(d_out, d_out, rng, true);
    }
    params.layers.push_back(std::move(lp));
  }
  const int d = cfg.output_dim();
  if (edge_head_classes > 0) {
    HeadParams h;
    h.W = Tensor::glorot(4 * d, edge_head_classes, rng, true);
    h.b = Tensor::zeros(1, edge_head_classes, true);
    params.edge_head = std::move(h);
  }
  if (node_head_classes > 0) {
    HeadParams h;
    h.W = Tensor::glorot(2 * d, node_head_classes, rng, true);
    h.b = Tensor::zeros(1, node_head_classes, true);
    params.node_head = std::move(h);
  }
  return params;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto push_attn = [&out](const std::string& prefix, const AttnParams& p) {
    out.emplace_back(prefix + ".W", p.W);
    if (p.b.defined()) out.emplace_back(prefix + ".b", p.b);
  };
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    const LayerParams& lp = layers[l];
    push_attn(base + ".amp", lp.amp);
    push_attn(base + ".phase", lp.phase);
    if (lp.amp_from_phase) push_attn(base + ".amp_from_phase", *lp.amp_from_phase);
    if (lp.phase_from_amp) push_attn(base + ".phase_from_amp", *lp.phase_from_amp);
    if (lp.ews_amp_from_phase.defined())
      out.emplace_back(base + ".ews_amp_from_phase", lp.ews_amp_from_phase);
    if (lp.ews_phase_from_amp.defined())
      out.emplace_back(base + ".ews_phase_from_amp", lp.ews_phase_from_amp);
  }
  if (edge_head) {
    out.emplace_back("edge_head.W", edge_head->W);
    out.emplace_back("edge_head.b", edge_head->b);
  }
  if (node_head) {
    out.emplace_back("node_head.W", node_head->W);
    out.emplace_back("node_head.b", node_head->b);
  }
  return out;
}

std::vector<Tensor> EncoderParams::all() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

size_t EncoderParams::param_count() const {
  size_t n = 0;
  for (const auto& [name, t] : named()) n += t.numel();
  return n;
}

ComplexEmbedding init_embeddings(const DiGraph& g, int d, InitMode mode, uint64_t seed) {
  if (g.num_nodes <= 0) throw ConfigError("init_embeddings: empty graph");
  ComplexEmbedding emb;
  if (mode == InitMode::RandomNormal) {
    if (d <= 0) throw ConfigError("init_embeddings: embedding dim must be positive");
    std::mt19937_64 rng_a(mix_seed(seed, 0));
    std::mt19937_64 rng_p(mix_seed(seed, 1));
    emb.amplitude = Tensor::randn(g.num_nodes, d, rng_a, false);
    emb.phase = Tensor::randn(g.num_nodes, d, rng_p, false);
  } else {
    if (!g.has_features()) throw ConfigError("init_embeddings: feature mode requires node features");
    emb.amplitude = Tensor::from_matrix(g.features, false);
    emb.phase = Tensor::from_matrix(g.features, false);
  }
  return emb;
}

Tensor segment_softmax(Tape& tape, const Tensor& logits, std::span<const int> seg,
                       int num_segments) {
  if (logits.cols() != 1 || logits.rows() != static_cast<int>(seg.size()))
    throw std::invalid_argument("segment_softmax: logits must be E x 1 matching segment ids");
  // Shift by the per-segment max as a constant; softmax is shift-invariant so
  // the gradient is unaffected, and exp() stays bounded.
  std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
  const auto& lv = logits.data();
  for (size_t i = 0; i < seg.size(); ++i) seg_max[seg[i]] = std::max(seg_max[seg[i]], lv[i]);
  std::vector<double> shift(seg.size());
  for (size_t i = 0; i < seg.size(); ++i) shift[i] = seg_max[seg[i]];
  Tensor shift_t = Tensor::from(std::move(shift), logits.rows(), 1, false);

  Tensor shifted = tape.sub(logits, shift_t);
  Tensor e = tape.exp(shifted);
  Tensor denom = tape.segment_sum(e, seg, num_segments);
  Tensor log_denom = tape.log(tape.row_gather(denom, seg));
  return tape.exp(tape.sub(shifted, log_denom));
}

Tensor aggregate(Tape& tape, const Tensor& x_in, const AttnParams& p, std::span<const int> dst,
                 std::span<const int> src, std::span<const double> sign, int num_nodes,
                 Backbone backbone, double leaky_slope) {
  if (x_in.cols() != p.W.rows())
    throw std::invalid_argument("aggregate: input dim does not match transform");
  Tensor H = tape.matmul(x_in, p.W);  // n x d_out
  if (dst.empty()) return Tensor::zeros(num_nodes, H.cols(), false);
  Tensor Hv = tape.row_gather(H, src);

  Tensor weighted;
  if (backbone == Backbone::GCN) {
    weighted = Hv;
    if (!sign.empty()) {
      Tensor sign_t = Tensor::from(std::vector<double>(sign.begin(), sign.end()),
                                   static_cast<int>(sign.size()), 1, false);
      weighted = tape.scale_rows(Hv, sign_t);
    }
  } else {
    if (!p.b.defined() || p.b.rows() != 2 * H.cols() || p.b.cols() != 1)
      throw std::invalid_argument("aggregate: attention vector shape mismatch");
    Tensor Hu = tape.row_gather(H, dst);
    Tensor cat = tape.concat_cols(Hu, Hv);
    Tensor logits = tape.leaky_relu(tape.matmul(cat, p.b), leaky_slope);
    Tensor alpha = segment_softmax(tape, logits, dst, num_nodes);
    if (!sign.empty()) {
      Tensor sign_t = Tensor::from(std::vector<double>(sign.begin(), sign.end()),
                                   static_cast<int>(sign.size()), 1, false);
      alpha = tape.hadamard(alpha, sign_t);
    }
    weighted = tape.scale_rows(Hv, alpha);
  }
  return tape.segment_sum(weighted, dst, num_nodes);
}

Tensor amplitude_layer(Tape& tape, const Tensor& a_in, const AggIndex& idx, const AttnParams& p,
                       Backbone backbone, double leaky_slope) {
  return tape.relu(
      aggregate(tape, a_in, p, idx.dst, idx.src, {}, idx.num_nodes, backbone, leaky_slope));
}

namespace {

Tensor phase_preact(Tape& tape, const Tensor& theta_in, const AggIndex& idx, const AttnParams& p,
                    Backbone backbone, double leaky_slope, PhaseNorm norm) {
  if (norm == PhaseNorm::Union || backbone == Backbone::GCN) {
    return aggregate(tape, theta_in, p, idx.dst, idx.src, idx.phase_sign, idx.num_nodes, backbone,
                     leaky_slope);
  }
  // PerSign: separate softmax over the in-plus-self and the out sets, sharing
  // one (W, b); the out aggregation enters with a minus sign.
  Tensor pos = aggregate(tape, theta_in, p, idx.in_dst, idx.in_src, {}, idx.num_nodes, backbone,
                         leaky_slope);
  if (idx.out_dst.empty()) return pos;
  Tensor neg = aggregate(tape, theta_in, p, idx.out_dst, idx.out_src, {}, idx.num_nodes, backbone,
                         leaky_slope);
  return tape.sub(pos, neg);
}

}  // namespace

Tensor phase_layer(Tape& tape, const Tensor& theta_in, const AggIndex& idx, const AttnParams& p,
                   Backbone backbone, double leaky_slope, PhaseNorm norm) {
  return tape.relu(phase_preact(tape, theta_in, idx, p, backbone, leaky_slope, norm));
}

Tensor gcn_layer(Tape& tape, const Tensor& x_in, const AggIndex& idx, const AttnParams& p,
                 bool sign_split) {
  if (sign_split)
    return phase_layer(tape, x_in, idx, p, Backbone::GCN, 0.0, PhaseNorm::Union);
  return amplitude_layer(tape, x_in, idx, p, Backbone::GCN, 0.0);
}

std::pair<Tensor, Tensor> fusion_step(Tape& tape, const Tensor& a_in, const Tensor& theta_in,
                                      const AggIndex& idx, const LayerParams& lp,
                                      const EncoderConfig& cfg) {
  if (!lp.amp_from_phase || !lp.phase_from_amp)
    throw ConfigError("fusion_step: cross-aggregation parameters missing at a fusion layer");
  // Amplitude side: undirected aggregation of both embeddings.
  Tensor a_self = aggregate(tape, a_in, lp.amp, idx.dst, idx.src, {}, idx.num_nodes, cfg.backbone,
                            cfg.leaky_slope);
  Tensor a_cross = aggregate(tape, theta_in, *lp.amp_from_phase, idx.dst, idx.src, {},
                             idx.num_nodes, cfg.backbone, cfg.leaky_slope);
  Tensor a_out = tape.relu(tape.add(a_self, a_cross));
  // Phase side: sign-split aggregation of both embeddings.
  Tensor p_self =
      phase_preact(tape, theta_in, idx, lp.phase, cfg.backbone, cfg.leaky_slope, cfg.phase_norm);
  Tensor p_cross = phase_preact(tape, a_in, idx, *lp.phase_from_amp, cfg.backbone, cfg.leaky_slope,
                                cfg.phase_norm);
  Tensor theta_out = tape.relu(tape.add(p_self, p_cross));
  return {a_out, theta_out};
}

ComplexEmbedding encode(Tape& tape, const AggIndex& idx, const ComplexEmbedding& init,
                        const EncoderConfig& cfg, const EncoderParams& params, bool training,
                        uint64_t dropout_seed) {
  cfg.validate();
  if (static_cast<int>(params.layers.size()) != cfg.layers)
    throw ConfigError("encode: parameter layer count does not match config");
  if (init.amplitude.cols() != cfg.input_dim())
    throw ConfigError("encode: input dim mismatch");
  const auto fusion_at = cfg.fusion_layers();

  Tensor a = init.amplitude;
  Tensor th = init.phase;
  for (int l = 1; l <= cfg.layers; ++l) {
    const LayerParams& lp = params.layers[l - 1];
    Tensor a_next, th_next;
    if (std::find(fusion_at.begin(), fusion_at.end(), l) != fusion_at.end()) {
      std::tie(a_next, th_next) = fusion_step(tape, a, th, idx, lp, cfg);
    } else {
      a_next = amplitude_layer(tape, a, idx, lp.amp, cfg.backbone, cfg.leaky_slope);
      th_next =
          phase_layer(tape, th, idx, lp.phase, cfg.backbone, cfg.leaky_slope, cfg.phase_norm);
      if (cfg.fusion == Fusion::EWS) {
        Tensor a_mix = tape.relu(tape.add(a_next, tape.matmul(th_next, lp.ews_amp_from_phase)));
        Tensor th_mix = tape.relu(tape.add(th_next, tape.matmul(a_next, lp.ews_phase_from_amp)));
        a_next = a_mix;
        th_next = th_mix;
      }
    }
    const bool hidden = l < cfg.layers;
    if (hidden && training && cfg.dropout > 0.0) {
      a_next = tape.dropout(a_next, cfg.dropout, true, mix_seed(dropout_seed, 2 * l));
      th_next = tape.dropout(th_next, cfg.dropout, true, mix_seed(dropout_seed, 2 * l + 1));
    }
    a = a_next;
    th = th_next;
  }
  return {a, th};
}

Tensor head_edge_classifier(Tape& tape, const ComplexEmbedding& emb,
                            std::span<const EdgeSample> pairs, const HeadParams& head) {
  if (pairs.empty()) throw std::invalid_argument("head_edge_classifier: empty pair list");
  const int d = emb.amplitude.cols();
  if (head.W.rows() != 4 * d)
    throw std::invalid_argument("head_edge_classifier: head expects 4d input rows");
  std::vector<int> us, vs;
  us.reserve(pairs.size());
  vs.reserve(pairs.size());
  for (const auto& p : pairs) {
    us.push_back(p.u);
    vs.push_back(p.v);
  }
  Tensor au = tape.row_gather(emb.amplitude, us);
  Tensor tu = tape.row_gather(emb.phase, us);
  Tensor av = tape.row_gather(emb.amplitude, vs);
  Tensor tv = tape.row_gather(emb.phase, vs);
  Tensor cat = tape.concat_cols(tape.concat_cols(au, tu), tape.concat_cols(av, tv));
  return tape.add_rowvec(tape.matmul(cat, head.W), head.b);
}

Tensor head_node_classifier(Tape& tape, const ComplexEmbedding& emb, const HeadParams& head) {
  const int d = emb.amplitude.cols();
  if (head.W.rows() != 2 * d)
    throw std::invalid_argument("head_node_classifier: head expects 2d input rows");
  Tensor cat = tape.concat_cols(emb.amplitude, emb.phase);
  return tape.add_rowvec(tape.matmul(cat, head.W), head.b);
}

}  // namespace duplex
