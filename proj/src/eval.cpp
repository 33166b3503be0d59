#include "duplex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

namespace duplex {

using json = nlohmann::json;

Subtask subtask_from_string(const std::string& s) {
  if (s == "ep" || s == "EP") return Subtask::EP;
  if (s == "dp" || s == "DP") return Subtask::DP;
  if (s == "tp" || s == "TP") return Subtask::TP;
  if (s == "fp" || s == "FP") return Subtask::FP;
  throw ConfigError("unknown subtask '" + s + "' (expected ep|dp|tp|fp)");
}

const char* subtask_name(Subtask t) {
  switch (t) {
    case Subtask::EP: return "ep";
    case Subtask::DP: return "dp";
    case Subtask::TP: return "tp";
    case Subtask::FP: return "fp";
  }
  return "?";
}

std::string MetricReport::to_json() const {
  json j;
  if (has_auc) j["auc"] = auc;
  j["acc"] = acc;
  j["macro_f1"] = macro_f1;
  j["micro_f1"] = micro_f1;
  j["n_samples"] = n_samples;
  j["empty"] = empty;
  if (!confusion.empty()) j["confusion"] = confusion;
  return j.dump(2);
}

namespace {

std::vector<LabeledPair> sample_nonedges(const DiGraph& full, int count, std::mt19937_64& rng,
                                         int label) {
  std::vector<LabeledPair> out;
  long long rejections = 0;
  for (int i = 0; i < count; ++i) {
    for (;;) {
      const int u = static_cast<int>(bounded_rand(rng, full.num_nodes));
      const int v = static_cast<int>(bounded_rand(rng, full.num_nodes));
      if (u != v && !full.has_edge(u, v) && !full.has_edge(v, u)) {
        out.push_back({u, v, label});
        break;
      }
      if (++rejections > 1000000)
        throw std::runtime_error("build_subtask_testset: graph too dense for non-edge sampling");
    }
  }
  return out;
}

}  // namespace

std::vector<LabeledPair> build_subtask_testset(const LinkSplit& split, const DiGraph& full_graph,
                                               Subtask kind, uint64_t seed) {
  if (split.test_edges.empty()) throw std::invalid_argument("build_subtask_testset: no test edges");
  std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(kind)));

  // Classify test edges against the full graph.
  std::vector<Edge> uni;
  std::set<Edge> bid;  // canonical (min,max) unordered pairs
  for (const auto& [u, v] : split.test_edges) {
    if (ham_lookup(full_graph, u, v).rel == Relation::Bidirectional)
      bid.insert({std::min(u, v), std::max(u, v)});
    else
      uni.emplace_back(u, v);
  }

  std::vector<LabeledPair> pairs;
  switch (kind) {
    case Subtask::EP: {
      const int n_pos = static_cast<int>(split.test_edges.size());
      for (const auto& [u, v] : split.test_edges) pairs.push_back({u, v, 1});
      // Negatives: half reversed unidirectional test edges, half non-edges.
      std::vector<Edge> rev_pool = uni;
      shuffle_vec(rev_pool, rng);
      const int n_rev = std::min(n_pos / 2, static_cast<int>(rev_pool.size()));
      for (int i = 0; i < n_rev; ++i) pairs.push_back({rev_pool[i].second, rev_pool[i].first, 0});
      auto negs = sample_nonedges(full_graph, n_pos - n_rev, rng, 0);
      pairs.insert(pairs.end(), negs.begin(), negs.end());
      break;
    }
    case Subtask::DP: {
      if (uni.empty())
        throw std::invalid_argument("build_subtask_testset: no unidirectional test edges for DP");
      for (const auto& [u, v] : uni) {
        pairs.push_back({u, v, 1});
        pairs.push_back({v, u, 0});
      }
      break;
    }
    case Subtask::TP: {
      if (uni.empty())
        throw std::invalid_argument("build_subtask_testset: no unidirectional test edges for TP");
      for (const auto& [u, v] : uni) {
        pairs.push_back({u, v, 0});
        pairs.push_back({v, u, 1});
      }
      auto negs = sample_nonedges(full_graph, static_cast<int>(uni.size()), rng, 2);
      pairs.insert(pairs.end(), negs.begin(), negs.end());
      break;
    }
    case Subtask::FP: {
      if (uni.empty())
        throw std::invalid_argument("build_subtask_testset: no unidirectional test edges for FP");
      for (const auto& [u, v] : uni) {
        pairs.push_back({u, v, 0});
        pairs.push_back({v, u, 1});
      }
      int cap = static_cast<int>(uni.size());
      int used = 0;
      for (const auto& [u, v] : bid) {
        if (used++ >= cap) break;
        pairs.push_back({u, v, 2});
      }
      auto negs = sample_nonedges(full_graph, static_cast<int>(uni.size()), rng, 3);
      pairs.insert(pairs.end(), negs.begin(), negs.end());
      break;
    }
  }
  return pairs;
}

double auc_rank(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_rank: size mismatch");
  long long n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc_rank: need both classes present");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u_stat =
      rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u_stat / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::pair<double, double> f1_scores(const std::vector<std::vector<long long>>& confusion) {
  const size_t C = confusion.size();
  long long total = 0, diag = 0;
  double macro = 0.0;
  for (size_t c = 0; c < C; ++c) {
    if (confusion[c].size() != C) throw std::invalid_argument("f1_scores: non-square confusion");
    long long tp = confusion[c][c], fn = 0, fp = 0;
    for (size_t k = 0; k < C; ++k) {
      total += confusion[c][k];
      if (k != c) {
        fn += confusion[c][k];
        fp += confusion[k][c];
      }
    }
    diag += tp;
    const long long denom = 2 * tp + fp + fn;
    macro += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  macro /= C ? static_cast<double>(C) : 1.0;
  const double micro = total == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(total);
  return {macro, micro};
}

namespace {

MetricReport binary_report(const std::vector<double>& scores, const std::vector<int>& labels) {
  MetricReport rep;
  rep.n_samples = static_cast<int>(scores.size());
  rep.has_auc = true;
  rep.auc = auc_rank(scores, labels);
  rep.confusion.assign(2, std::vector<long long>(2, 0));
  for (size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] > 0.5 ? 1 : 0;
    ++rep.confusion[labels[i]][pred];
  }
  long long correct = rep.confusion[0][0] + rep.confusion[1][1];
  rep.acc = static_cast<double>(correct) / static_cast<double>(scores.size());
  std::tie(rep.macro_f1, rep.micro_f1) = f1_scores(rep.confusion);
  return rep;
}

MetricReport argmax_report(const std::vector<int>& preds, const std::vector<int>& labels, int C) {
  MetricReport rep;
  rep.n_samples = static_cast<int>(preds.size());
  rep.confusion.assign(C, std::vector<long long>(C, 0));
  long long correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    ++rep.confusion[labels[i]][preds[i]];
    if (preds[i] == labels[i]) ++correct;
  }
  rep.acc = preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
  std::tie(rep.macro_f1, rep.micro_f1) = f1_scores(rep.confusion);
  return rep;
}

}  // namespace

MetricReport score_subtask(const EmbeddingMatrices& emb, const std::vector<LabeledPair>& pairs,
                           Subtask kind, Distance distance) {
  if (pairs.empty()) throw std::invalid_argument("score_subtask: empty pair set");
  // Pair lists may come from files; validate before the unchecked hot loop.
  const int n = emb.amplitude.rows;
  const int num_labels = kind == Subtask::TP ? 3 : (kind == Subtask::FP ? 4 : 2);
  for (const auto& p : pairs) {
    if (p.u < 0 || p.u >= n || p.v < 0 || p.v >= n)
      throw std::invalid_argument("score_subtask: node id out of range");
    if (p.label < 0 || p.label >= num_labels)
      throw std::invalid_argument("score_subtask: label out of range for subtask");
  }
  static constexpr Relation dp_set[] = {Relation::Forward, Relation::Reverse};
  static constexpr Relation tp_set[] = {Relation::Forward, Relation::Reverse, Relation::NoEdge};

  if (kind == Subtask::EP || kind == Subtask::DP) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(pairs.size());
    labels.reserve(pairs.size());
    for (const auto& p : pairs) {
      const ComplexScore s = hermitian_score(emb.amplitude, emb.phase, p.u, p.v);
      if (kind == Subtask::EP) {
        const auto probs = direction_probs(s, distance);
        scores.push_back(probs[static_cast<int>(Relation::Forward)] +
                         probs[static_cast<int>(Relation::Bidirectional)]);
      } else {
        const auto probs = direction_probs(s, distance, dp_set);
        scores.push_back(probs[static_cast<int>(Relation::Forward)]);
      }
      labels.push_back(p.label);
    }
    return binary_report(scores, labels);
  }

  std::vector<int> preds, labels;
  preds.reserve(pairs.size());
  labels.reserve(pairs.size());
  for (const auto& p : pairs) {
    const ComplexScore s = hermitian_score(emb.amplitude, emb.phase, p.u, p.v);
    if (kind == Subtask::TP) {
      const auto probs = direction_probs(s, distance, tp_set);
      int arg = 0;
      double best = probs[static_cast<int>(Relation::Forward)];
      if (probs[static_cast<int>(Relation::Reverse)] > best) {
        best = probs[static_cast<int>(Relation::Reverse)];
        arg = 1;
      }
      if (probs[static_cast<int>(Relation::NoEdge)] > best) arg = 2;
      preds.push_back(arg);
    } else {
      const auto probs = direction_probs(s, distance);
      int arg = 0;
      for (int k = 1; k < 4; ++k)
        if (probs[k] > probs[arg]) arg = k;
      preds.push_back(arg);
    }
    labels.push_back(p.label);
  }
  return argmax_report(preds, labels, kind == Subtask::TP ? 3 : 4);
}

std::vector<StratumResult> degree_stratified_auc(const EmbeddingMatrices& emb,
                                                 const std::vector<LabeledPair>& ep_pairs,
                                                 const DiGraph& graph,
                                                 std::span<const int> thresholds,
                                                 Distance distance) {
  std::vector<StratumResult> out;
  for (int t : thresholds) {
    std::vector<LabeledPair> stratum;
    for (const auto& p : ep_pairs)
      if (graph.out_degree(p.u) <= t || graph.in_degree(p.v) <= t) stratum.push_back(p);
    StratumResult r;
    r.threshold = t;
    bool both = false, seen0 = false, seen1 = false;
    for (const auto& p : stratum) {
      (p.label ? seen1 : seen0) = true;
      both = seen0 && seen1;
      if (both) break;
    }
    if (stratum.empty() || !both) {
      r.report.empty = true;
      r.report.n_samples = static_cast<int>(stratum.size());
    } else {
      r.report = score_subtask(emb, stratum, Subtask::EP, distance);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_strata_csv(std::ostream& out, const std::vector<StratumResult>& strata) {
  out << "threshold,auc,n\n";
  for (const auto& s : strata) {
    out << s.threshold << ",";
    if (s.report.empty)
      out << "nan";
    else
      out << s.report.auc;
    out << "," << s.report.n_samples << "\n";
  }
}

MetricReport transductive_probe(const EmbeddingMatrices& emb, const DiGraph& g,
                                const NodeSplit& split, const ProbeConfig& cfg, uint64_t seed) {
  if (!g.has_labels()) throw ConfigError("transductive_probe: graph has no labels");
  const int n = g.num_nodes, d2 = emb.amplitude.cols * 2, C = g.num_classes;

  std::vector<double> xdata(static_cast<size_t>(n) * d2);
  for (int i = 0; i < n; ++i) {
    std::copy(emb.amplitude.row(i), emb.amplitude.row(i) + emb.amplitude.cols,
              xdata.begin() + static_cast<size_t>(i) * d2);
    std::copy(emb.phase.row(i), emb.phase.row(i) + emb.phase.cols,
              xdata.begin() + static_cast<size_t>(i) * d2 + emb.amplitude.cols);
  }
  Tensor X = Tensor::from(std::move(xdata), n, d2, false);

  std::mt19937_64 rng(seed);
  Tensor W1 = Tensor::glorot(d2, cfg.hidden, rng, true);
  Tensor b1 = Tensor::zeros(1, cfg.hidden, true);
  Tensor W2 = Tensor::glorot(cfg.hidden, C, rng, true);
  Tensor b2 = Tensor::zeros(1, C, true);
  Adam adam({W1, b1, W2, b2}, AdamConfig{.lr = cfg.lr});

  std::vector<int> train_labels, val_labels;
  for (int u : split.train_nodes) train_labels.push_back(g.labels[u]);
  for (int u : split.val_nodes) val_labels.push_back(g.labels[u]);

  auto forward = [&](Tape& tape, bool training, uint64_t drop_seed) {
    Tensor h = tape.relu(tape.add_rowvec(tape.matmul(X, W1), b1));
    h = tape.dropout(h, cfg.dropout, training, drop_seed);
    return tape.add_rowvec(tape.matmul(h, W2), b2);
  };

  double best_val = -1.0;
  std::array<std::vector<double>, 4> best{W1.data(), b1.data(), W2.data(), b2.data()};
  int last_improve = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Tape tape;
    Tensor logits = forward(tape, true, mix_seed(seed, epoch + 1));
    Tensor sel = tape.row_gather(logits, split.train_nodes);
    Tensor loss = supervised_ce_loss(tape, sel, train_labels);
    if (!std::isfinite(loss.scalar()))
      throw std::runtime_error("transductive_probe: non-finite loss at epoch " +
                               std::to_string(epoch));
    tape.backward(loss);
    adam.step();

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.max_epochs) {
      Tape vtape;
      Tensor vlogits = forward(vtape, false, 0);
      Tensor vsel = vtape.row_gather(vlogits, split.val_nodes);
      int correct = 0;
      for (int i = 0; i < vsel.rows(); ++i) {
        int arg = 0;
        for (int j = 1; j < C; ++j)
          if (vsel.at(i, j) > vsel.at(i, arg)) arg = j;
        if (arg == val_labels[i]) ++correct;
      }
      const double vacc = split.val_nodes.empty()
                              ? 0.0
                              : static_cast<double>(correct) / split.val_nodes.size();
      if (vacc > best_val) {
        best_val = vacc;
        best = {W1.data(), b1.data(), W2.data(), b2.data()};
        last_improve = epoch;
      } else if (epoch - last_improve >= cfg.patience) {
        break;
      }
    }
  }
  W1.data() = best[0];
  b1.data() = best[1];
  W2.data() = best[2];
  b2.data() = best[3];

  Tape tape;
  Tensor logits = forward(tape, false, 0);
  std::vector<int> preds, labels;
  for (int u : split.test_nodes) {
    int arg = 0;
    for (int j = 1; j < C; ++j)
      if (logits.at(u, j) > logits.at(u, arg)) arg = j;
    preds.push_back(arg);
    labels.push_back(g.labels[u]);
  }
  return argmax_report(preds, labels, C);
}

MetricReport inductive_protocol(const DiGraph& g, const NodeSplit& split,
                                const EncoderConfig& ecfg, const TrainConfig& tcfg,
                                uint64_t seed) {
  if (!g.has_features()) throw ConfigError("inductive_protocol: graph has no node attributes");
  if (!g.has_labels()) throw ConfigError("inductive_protocol: graph has no labels");

  // Train side: test nodes and all their incident edges removed.
  std::vector<int> keep = split.train_nodes;
  keep.insert(keep.end(), split.val_nodes.begin(), split.val_nodes.end());
  DiGraph sub = induced_subgraph(g, keep);
  NodeSplit sub_split;
  for (int i = 0; i < static_cast<int>(split.train_nodes.size()); ++i)
    sub_split.train_nodes.push_back(i);
  for (int i = 0; i < static_cast<int>(split.val_nodes.size()); ++i)
    sub_split.val_nodes.push_back(static_cast<int>(split.train_nodes.size()) + i);

  EncoderConfig cfg = ecfg;
  cfg.dims[0] = g.features.cols;
  TrainConfig tc = tcfg;
  tc.mode = TrainMode::SupervisedNodes;

  ComplexEmbedding init = init_embeddings(sub, cfg.dims[0], InitMode::Features, seed);
  EncoderParams params = init_params(cfg, mix_seed(seed, 7), 0, g.num_classes);

  TrainInputs inputs;
  inputs.full_graph = &sub;
  inputs.node_split = &sub_split;
  TrainResult res = train(inputs, init, cfg, std::move(params), tc);

  // Test side: one eval-mode forward over the full graph.
  const AggIndex full_idx = AggIndex::build(g);
  ComplexEmbedding full_init = init_embeddings(g, cfg.dims[0], InitMode::Features, seed);
  Tape tape;
  ComplexEmbedding emb = encode(tape, full_idx, full_init, cfg, res.params, false, 0);
  Tensor logits = head_node_classifier(tape, emb, *res.params.node_head);

  std::vector<int> preds, labels;
  const int C = g.num_classes;
  for (int u : split.test_nodes) {
    int arg = 0;
    for (int j = 1; j < C; ++j)
      if (logits.at(u, j) > logits.at(u, arg)) arg = j;
    preds.push_back(arg);
    labels.push_back(g.labels[u]);
  }
  return argmax_report(preds, labels, C);
}

}  // namespace duplex
