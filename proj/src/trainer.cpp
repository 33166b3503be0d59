#include "duplex/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace duplex {

namespace fs = std::filesystem;
using json = nlohmann::json;

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (lr <= 0.0) throw ConfigError("train: lr must be > 0");
  if (patience < 0 || patience > max_epochs)
    throw ConfigError("train: patience must be in [0, max_epochs]");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (batch_size < 0) throw ConfigError("train: batch_size must be >= 0");
  lambda_at(schedule, 0);  // validates schedule parameters
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> snapshot_params(const EncoderParams& params) {
  std::vector<std::vector<double>> snap;
  for (const auto& [name, t] : params.named()) snap.push_back(t.data());
  return snap;
}

void restore_params(EncoderParams& params, const std::vector<std::vector<double>>& snap) {
  auto named = params.named();
  for (size_t i = 0; i < named.size(); ++i) named[i].second.data() = snap[i];
}

// Fixed validation pairs: every held-out edge in both orientations labeled by
// the full graph's relation, plus an equal number of non-edges.
std::vector<EdgeSample> validation_pairs(const DiGraph& full, const std::vector<Edge>& val_edges,
                                         uint64_t seed) {
  std::vector<EdgeSample> out;
  for (const auto& [u, v] : val_edges) {
    const Relation r = ham_lookup(full, u, v).rel;
    out.push_back({u, v, r});
    out.push_back({v, u, r == Relation::Bidirectional ? r : Relation::Reverse});
  }
  std::mt19937_64 rng(seed);
  long long rejections = 0;
  for (size_t i = 0; i < val_edges.size(); ++i) {
    for (;;) {
      const int u = static_cast<int>(bounded_rand(rng, full.num_nodes));
      const int v = static_cast<int>(bounded_rand(rng, full.num_nodes));
      if (u != v && !full.has_edge(u, v) && !full.has_edge(v, u)) {
        out.push_back({u, v, Relation::NoEdge});
        break;
      }
      if (++rejections > 1000000)
        throw std::runtime_error("validation_pairs: graph too dense for negatives");
    }
  }
  return out;
}

double accuracy_from_logits(const Tensor& logits, std::span<const int> labels) {
  int correct = 0;
  for (int i = 0; i < logits.rows(); ++i) {
    int arg = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, arg)) arg = j;
    if (arg == labels[i]) ++correct;
  }
  return logits.rows() ? static_cast<double>(correct) / logits.rows() : 0.0;
}

}  // namespace

std::vector<EdgeSample> telemetry_pairs(const DiGraph& g, uint64_t seed, int cap) {
  std::vector<EdgeSample> out;
  std::vector<Edge> uni;
  for (const auto& [u, v] : g.edges) {
    if (g.has_edge(v, u)) {
      if (u < v) out.push_back({u, v, Relation::Bidirectional});
    } else {
      uni.emplace_back(u, v);
    }
  }
  for (const auto& [u, v] : uni) {
    out.push_back({u, v, Relation::Forward});
    out.push_back({v, u, Relation::Reverse});
  }
  std::mt19937_64 rng(seed);
  const size_t n_neg = uni.size();
  long long rejections = 0;
  for (size_t i = 0; i < n_neg; ++i) {
    const int u = static_cast<int>(bounded_rand(rng, g.num_nodes));
    const int v = static_cast<int>(bounded_rand(rng, g.num_nodes));
    if (u != v && !g.has_edge(u, v) && !g.has_edge(v, u)) out.push_back({u, v, Relation::NoEdge});
    if (++rejections > 1000000) break;
  }
  if (static_cast<int>(out.size()) > cap) {
    shuffle_vec(out, rng);
    out.resize(cap);
  }
  return out;
}

EmbeddingMatrices encode_eval(const DiGraph& g, const AggIndex& idx, const ComplexEmbedding& init,
                              const EncoderConfig& ecfg, const EncoderParams& params) {
  (void)g;
  Tape tape;
  ComplexEmbedding emb = encode(tape, idx, init, ecfg, params, /*training=*/false, 0);
  return {emb.amplitude.to_matrix(), emb.phase.to_matrix()};
}

TrainResult train(const TrainInputs& inputs, const ComplexEmbedding& init,
                  const EncoderConfig& ecfg, EncoderParams params, const TrainConfig& tcfg,
                  std::ostream* csv_stream) {
  tcfg.validate();
  ecfg.validate();
  if (!inputs.full_graph) throw ConfigError("train: full graph is required");
  const DiGraph& full = *inputs.full_graph;

  const bool link_mode = tcfg.mode != TrainMode::SupervisedNodes;
  if (link_mode && !inputs.link_split) throw ConfigError("train: link split required for this mode");
  if (tcfg.mode == TrainMode::SupervisedNodes) {
    if (!inputs.node_split) throw ConfigError("train: node split required for node classification");
    if (!full.has_labels()) throw ConfigError("train: graph has no labels");
    if (!params.node_head) throw ConfigError("train: parameters lack a node head");
  }
  if (tcfg.mode == TrainMode::SupervisedEdges && !params.edge_head)
    throw ConfigError("train: parameters lack an edge head");
  if (link_mode && inputs.link_split->train_edges.empty())
    throw ConfigError("train: empty train edge set");
  if (tcfg.mode == TrainMode::SupervisedNodes && inputs.node_split->train_nodes.empty())
    throw ConfigError("train: empty train node set");

  // The encoder always sees the training graph's structure; loss pairs are
  // what mini-batching chops up.
  const DiGraph& enc_graph = link_mode ? inputs.link_split->train_graph : full;
  const AggIndex idx = AggIndex::build(enc_graph);

  std::vector<EdgeSample> val_pairs;
  std::vector<int> val_labels;  // node labels (supervised-nodes) or relation ids
  if (link_mode) {
    val_pairs = validation_pairs(full, inputs.link_split->val_edges, mix_seed(tcfg.seed, 0xA11CE));
    for (const auto& s : val_pairs) val_labels.push_back(static_cast<int>(s.rel));
  } else {
    for (int u : inputs.node_split->val_nodes) val_labels.push_back(full.labels[u]);
  }

  std::vector<EdgeSample> nc_telemetry;
  if (!link_mode) nc_telemetry = telemetry_pairs(enc_graph, mix_seed(tcfg.seed, 0xBEEF));

  Adam adam(params.all(), AdamConfig{.lr = tcfg.lr});

  TrainResult result;
  result.best_val = link_mode && tcfg.mode == TrainMode::SelfSupervised
                        ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  const bool lower_better = tcfg.mode == TrainMode::SelfSupervised;
  std::vector<std::vector<double>> best_snapshot = snapshot_params(params);
  int last_improve_epoch = 0;
  double last_val = 0.0;

  if (csv_stream) *csv_stream << "epoch,train_loss,val_metric,lambda,ham_mse,wall_ms\n";

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    const double lam = lambda_at(tcfg.schedule, epoch);

    // ---- assemble this epoch's loss pairs / node chunks ----
    std::vector<EdgeSample> pairs;
    std::vector<int> train_nodes;
    if (link_mode)
      pairs = sample_batch(*inputs.link_split, full, tcfg.neg_ratio, mix_seed(tcfg.seed, 2 * epoch))
                  .samples;
    else
      train_nodes = inputs.node_split->train_nodes;

    std::mt19937_64 chunk_rng(mix_seed(tcfg.seed, 0xC0FFEE + epoch));
    if (tcfg.batch_size > 0) {
      if (link_mode)
        shuffle_vec(pairs, chunk_rng);
      else
        shuffle_vec(train_nodes, chunk_rng);
    }
    const size_t total = link_mode ? pairs.size() : train_nodes.size();
    const size_t chunk = tcfg.batch_size > 0 ? static_cast<size_t>(tcfg.batch_size) : total;

    double epoch_loss = 0.0;
    double epoch_ham = 0.0;
    for (size_t off = 0; off < total; off += chunk) {
      const size_t len = std::min(chunk, total - off);
      Tape tape;
      ComplexEmbedding emb =
          encode(tape, idx, init, ecfg, params, /*training=*/true, mix_seed(tcfg.seed, 2 * epoch + 1));
      Tensor loss;
      if (tcfg.mode == TrainMode::SelfSupervised) {
        std::span<const EdgeSample> part(pairs.data() + off, len);
        LossParts parts = total_loss(tape, emb, part, tcfg.schedule, epoch, tcfg.distance);
        loss = parts.total;
      } else if (tcfg.mode == TrainMode::SupervisedEdges) {
        std::span<const EdgeSample> part(pairs.data() + off, len);
        Tensor logits = head_edge_classifier(tape, emb, part, *params.edge_head);
        std::vector<int> labels(len);
        for (size_t i = 0; i < len; ++i) labels[i] = static_cast<int>(part[i].rel);
        loss = supervised_ce_loss(tape, logits, labels);
      } else {
        std::span<const int> part(train_nodes.data() + off, len);
        Tensor logits = head_node_classifier(tape, emb, *params.node_head);
        Tensor sel = tape.row_gather(logits, part);
        std::vector<int> labels(len);
        for (size_t i = 0; i < len; ++i) labels[i] = full.labels[part[i]];
        loss = supervised_ce_loss(tape, sel, labels);
      }
      const double lv = loss.scalar();
      if (!std::isfinite(lv))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += lv * static_cast<double>(len);
      tape.backward(loss);
      adam.step();
      if (off + len >= total) {
        // Reconstruction telemetry from this forward pass (pre-update params
        // were used; with dropout 0 this equals the eval-mode encoding).
        const Matrix am = emb.amplitude.to_matrix();
        const Matrix ph = emb.phase.to_matrix();
        if (link_mode) {
          std::span<const EdgeSample> tel(pairs.data(),
                                          std::min<size_t>(pairs.size(), 100000));
          epoch_ham = ham_mse(am, ph, tel);
        } else {
          epoch_ham = ham_mse(am, ph, nc_telemetry);
        }
      }
    }
    epoch_loss /= static_cast<double>(total);

    // ---- periodic validation & early stopping ----
    bool checked = false;
    if ((epoch + 1) % tcfg.eval_every == 0 || epoch + 1 == tcfg.max_epochs) {
      checked = true;
      Tape vtape;
      ComplexEmbedding vemb = encode(vtape, idx, init, ecfg, params, /*training=*/false, 0);
      if (tcfg.mode == TrainMode::SelfSupervised) {
        last_val = val_pairs.empty()
                       ? epoch_loss  // degenerate split: fall back to train loss
                       : direction_loss(vtape, vemb, val_pairs, tcfg.distance).scalar();
      } else if (tcfg.mode == TrainMode::SupervisedEdges) {
        Tensor logits = head_edge_classifier(vtape, vemb, val_pairs, *params.edge_head);
        last_val = accuracy_from_logits(logits, val_labels);
      } else {
        Tensor logits = head_node_classifier(vtape, vemb, *params.node_head);
        Tensor sel = vtape.row_gather(logits, inputs.node_split->val_nodes);
        last_val = accuracy_from_logits(sel, val_labels);
      }
      if (!std::isfinite(last_val))
        throw std::runtime_error("train: non-finite validation metric at epoch " +
                                 std::to_string(epoch));
    }

    const auto toc = std::chrono::steady_clock::now();
    EpochRecord rec{epoch, epoch_loss, last_val, lam, epoch_ham,
                    std::chrono::duration_cast<std::chrono::milliseconds>(toc - tic).count()};
    result.log.records.push_back(rec);
    if (csv_stream)
      *csv_stream << rec.epoch << "," << fmt_double(rec.train_loss) << ","
                  << fmt_double(rec.val_metric) << "," << fmt_double(rec.lambda) << ","
                  << fmt_double(rec.ham_mse) << "," << rec.wall_ms << "\n";

    if (checked) {
      const bool improved = lower_better ? last_val < result.best_val : last_val > result.best_val;
      if (improved) {
        result.best_val = last_val;
        result.best_epoch = epoch;
        best_snapshot = snapshot_params(params);
        last_improve_epoch = epoch;
      } else if (epoch - last_improve_epoch >= tcfg.patience) {
        break;
      }
    }
  }

  restore_params(params, best_snapshot);
  result.params = std::move(params);
  result.embedding = encode_eval(enc_graph, idx, init, ecfg, result.params);
  return result;
}

void TrainLog::to_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_metric,lambda,ham_mse,wall_ms\n";
  for (const auto& r : records)
    out << r.epoch << "," << fmt_double(r.train_loss) << "," << fmt_double(r.val_metric) << ","
        << fmt_double(r.lambda) << "," << fmt_double(r.ham_mse) << "," << r.wall_ms << "\n";
}

TrainLog TrainLog::from_csv(std::istream& in) {
  TrainLog log;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("train log: empty stream");
  if (line.rfind("epoch,", 0) != 0) throw ParseError("train log: missing header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpochRecord r;
    std::istringstream ss(line);
    std::string cell;
    auto next = [&]() {
      if (!std::getline(ss, cell, ','))
        throw ParseError("train log: truncated row at line " + std::to_string(lineno));
      return cell;
    };
    try {
      r.epoch = std::stoi(next());
      r.train_loss = std::stod(next());
      r.val_metric = std::stod(next());
      r.lambda = std::stod(next());
      r.ham_mse = std::stod(next());
      r.wall_ms = std::stoll(next());
    } catch (const std::exception&) {
      throw ParseError("train log: bad value at line " + std::to_string(lineno));
    }
    log.records.push_back(r);
  }
  return log;
}

bool TrainLog::same_values(const TrainLog& other) const {
  if (records.size() != other.records.size()) return false;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto &a = records[i], &b = other.records[i];
    if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_metric != b.val_metric ||
        a.lambda != b.lambda || a.ham_mse != b.ham_mse)
      return false;
  }
  return true;
}

void save_embeddings(const EmbeddingMatrices& emb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  const int n = emb.amplitude.rows, d = emb.amplitude.cols;
  out << "id";
  for (int k = 1; k <= d; ++k) out << ",a_" << k;
  for (int k = 1; k <= d; ++k) out << ",theta_" << k;
  out << "\n";
  for (int i = 0; i < n; ++i) {
    out << i;
    for (int k = 0; k < d; ++k) out << "," << fmt_double(emb.amplitude.at(i, k));
    for (int k = 0; k < d; ++k) out << "," << fmt_double(emb.phase.at(i, k));
    out << "\n";
  }
}

EmbeddingMatrices load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty embedding file");
  int d = 0;
  {
    std::istringstream hs(header);
    std::string cell;
    while (std::getline(hs, cell, ','))
      if (cell.rfind("a_", 0) == 0) ++d;
  }
  if (d == 0) throw ParseError(path + ": header declares no amplitude columns");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    bool first = true;
    int id = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          id = std::stoi(cell);
          first = false;
        } else {
          vals.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
    }
    if (static_cast<int>(vals.size()) != 2 * d)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(2 * d) +
                       " values");
    if (id != static_cast<int>(rows.size()))
      throw ParseError(path + ":" + std::to_string(lineno) + ": ids must be dense and in order");
    rows.push_back(std::move(vals));
  }
  EmbeddingMatrices emb;
  emb.amplitude = Matrix(static_cast<int>(rows.size()), d);
  emb.phase = Matrix(static_cast<int>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < d; ++k) {
      emb.amplitude.at(static_cast<int>(i), k) = rows[i][k];
      emb.phase.at(static_cast<int>(i), k) = rows[i][d + k];
    }
  return emb;
}

void save_checkpoint(const EncoderParams& params, const std::string& dir, uint64_t config_hash,
                     uint64_t seed) {
  fs::create_directories(dir);
  const auto named = params.named();
  json manifest;
  manifest["config_hash"] = hex64(config_hash);
  manifest["seed"] = seed;
  json tensors = json::array();
  size_t offset = 0;
  std::ofstream blob(dir + "/checkpoint.bin", std::ios::binary);
  if (!blob) throw ParseError("cannot write " + dir + "/checkpoint.bin");
  for (const auto& [name, t] : named) {
    tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", offset}});
    blob.write(reinterpret_cast<const char*>(t.data().data()),
               static_cast<std::streamsize>(t.numel() * sizeof(double)));
    offset += t.numel();
  }
  manifest["tensors"] = std::move(tensors);
  std::ofstream mf(dir + "/checkpoint.json");
  if (!mf) throw ParseError("cannot write " + dir + "/checkpoint.json");
  mf << manifest.dump(2) << "\n";
}

void load_checkpoint(EncoderParams& params, const std::string& dir,
                     std::optional<uint64_t> expected_config_hash) {
  std::ifstream mf(dir + "/checkpoint.json");
  if (!mf) throw ParseError("cannot open " + dir + "/checkpoint.json");
  json manifest = json::parse(mf);
  if (expected_config_hash) {
    const std::string have = manifest.value("config_hash", "");
    if (have != hex64(*expected_config_hash))
      std::cerr << "warning: checkpoint config hash " << have << " differs from expected "
                << hex64(*expected_config_hash) << "; loading anyway\n";
  }
  struct Entry {
    int rows, cols;
    size_t offset;
  };
  std::map<std::string, Entry> entries;
  for (const auto& t : manifest.at("tensors"))
    entries[t.at("name").get<std::string>()] = {t.at("rows").get<int>(), t.at("cols").get<int>(),
                                                t.at("offset").get<size_t>()};
  std::ifstream blob(dir + "/checkpoint.bin", std::ios::binary);
  if (!blob) throw ParseError("cannot open " + dir + "/checkpoint.bin");

  std::string problems;
  auto named = params.named();
  for (auto& [name, t] : named) {
    auto it = entries.find(name);
    if (it == entries.end()) {
      problems += " missing:" + name;
      continue;
    }
    if (it->second.rows != t.rows() || it->second.cols != t.cols()) {
      problems += " shape:" + name;
      entries.erase(it);
      continue;
    }
    blob.seekg(static_cast<std::streamoff>(it->second.offset * sizeof(double)));
    blob.read(reinterpret_cast<char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!blob) problems += " short-read:" + name;
    entries.erase(it);
  }
  for (const auto& [name, e] : entries) problems += " unexpected:" + name;
  if (!problems.empty()) throw ParseError("checkpoint mismatch:" + problems);
}

}  // namespace duplex
