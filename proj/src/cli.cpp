#include "duplex/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "duplex/oracles.hpp"

namespace duplex {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Salts for the per-run derived seeds; eval must rebuild the exact same
// initial embeddings and parameter shapes the trainer used.
constexpr uint64_t kInitSalt = 101;
constexpr uint64_t kParamSalt = 102;
constexpr uint64_t kProbeSalt = 103;
constexpr uint64_t kTestsetSalt = 104;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError("config key '" + key + "': trailing junk in '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError("config key '" + key + "': trailing junk in '" + value + "'");
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError("config key '" + key + "': trailing junk in '" + value + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::array<int, 3> parse_ratio(const std::string& key, const std::string& s) {
  auto parts = split_list(s, ':');
  if (parts.size() != 3)
    throw ConfigError("config key '" + key + "': expected a:b:c ratio, got '" + s + "'");
  std::array<int, 3> r{};
  for (int i = 0; i < 3; ++i) {
    r[i] = parse_int(key, parts[i]);
    if (r[i] < 0) throw ConfigError("config key '" + key + "': negative ratio part in '" + s + "'");
  }
  if (r[0] <= 0) throw ConfigError("config key '" + key + "': train part must be positive");
  return r;
}

void require_choice(const std::string& key, const std::string& value,
                    std::initializer_list<const char*> choices) {
  for (const char* c : choices)
    if (value == c) return;
  std::string msg = "config key '" + key + "': '" + value + "' is not one of {";
  bool first = true;
  for (const char* c : choices) {
    if (!first) msg += ", ";
    msg += c;
    first = false;
  }
  throw ConfigError(msg + "}");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset.edges") dataset_edges = value;
  else if (key == "dataset.features") dataset_features = value;
  else if (key == "dataset.num_nodes") dataset_num_nodes = parse_int(key, value);
  else if (key == "task") task = value;
  else if (key == "subtasks") subtasks = value;
  else if (key == "split.dir") split_dir = value;
  else if (key == "split.ratio") split_ratio = value;
  else if (key == "node_split.ratio") node_split_ratio = value;
  else if (key == "encoder.layers") encoder_layers = parse_int(key, value);
  else if (key == "encoder.dim") encoder_dim = parse_int(key, value);
  else if (key == "encoder.backbone") encoder_backbone = value;
  else if (key == "encoder.fusion") encoder_fusion = value;
  else if (key == "encoder.phase_norm") encoder_phase_norm = value;
  else if (key == "encoder.dropout") encoder_dropout = parse_double(key, value);
  else if (key == "encoder.leaky_slope") encoder_leaky_slope = parse_double(key, value);
  else if (key == "encoder.init") encoder_init = value;
  else if (key == "train.mode") train_mode = value;
  else if (key == "train.max_epochs") train_max_epochs = parse_int(key, value);
  else if (key == "train.lr") train_lr = parse_double(key, value);
  else if (key == "train.patience") train_patience = parse_int(key, value);
  else if (key == "train.eval_every") train_eval_every = parse_int(key, value);
  else if (key == "train.batch_size") train_batch_size = parse_int(key, value);
  else if (key == "train.neg_ratio") train_neg_ratio = parse_double(key, value);
  else if (key == "loss.lambda0") loss_lambda0 = parse_double(key, value);
  else if (key == "loss.q") loss_q = parse_double(key, value);
  else if (key == "loss.decay_mode") loss_decay_mode = value;
  else if (key == "loss.distance") loss_distance = value;
  else if (key == "probe.hidden") probe_hidden = parse_int(key, value);
  else if (key == "probe.dropout") probe_dropout = parse_double(key, value);
  else if (key == "probe.lr") probe_lr = parse_double(key, value);
  else if (key == "probe.max_epochs") probe_max_epochs = parse_int(key, value);
  else if (key == "probe.patience") probe_patience = parse_int(key, value);
  else if (key == "eval.degree_thresholds") eval_degree_thresholds = value;
  else if (key == "out") out = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "seeds") seeds = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + ": top level must be an object");
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    std::string s;
    if (v.is_string()) s = v.get<std::string>();
    else if (v.is_boolean()) s = v.get<bool>() ? "true" : "false";
    else if (v.is_number_integer()) s = std::to_string(v.get<long long>());
    else if (v.is_number_unsigned()) s = std::to_string(v.get<unsigned long long>());
    else if (v.is_number_float()) s = fmt_g(v.get<double>());
    else throw ConfigError("config key '" + it.key() + "': value must be a scalar");
    cfg.set(it.key(), s);
  }
  return cfg;
}

std::map<std::string, std::string> RunConfig::flat() const {
  return {
      {"dataset.edges", dataset_edges},
      {"dataset.features", dataset_features},
      {"dataset.num_nodes", std::to_string(dataset_num_nodes)},
      {"task", task},
      {"subtasks", subtasks},
      {"split.dir", split_dir},
      {"split.ratio", split_ratio},
      {"node_split.ratio", node_split_ratio},
      {"encoder.layers", std::to_string(encoder_layers)},
      {"encoder.dim", std::to_string(encoder_dim)},
      {"encoder.backbone", encoder_backbone},
      {"encoder.fusion", encoder_fusion},
      {"encoder.phase_norm", encoder_phase_norm},
      {"encoder.dropout", fmt_g(encoder_dropout)},
      {"encoder.leaky_slope", fmt_g(encoder_leaky_slope)},
      {"encoder.init", encoder_init},
      {"train.mode", train_mode},
      {"train.max_epochs", std::to_string(train_max_epochs)},
      {"train.lr", fmt_g(train_lr)},
      {"train.patience", std::to_string(train_patience)},
      {"train.eval_every", std::to_string(train_eval_every)},
      {"train.batch_size", std::to_string(train_batch_size)},
      {"train.neg_ratio", fmt_g(train_neg_ratio)},
      {"loss.lambda0", fmt_g(loss_lambda0)},
      {"loss.q", fmt_g(loss_q)},
      {"loss.decay_mode", loss_decay_mode},
      {"loss.distance", loss_distance},
      {"probe.hidden", std::to_string(probe_hidden)},
      {"probe.dropout", fmt_g(probe_dropout)},
      {"probe.lr", fmt_g(probe_lr)},
      {"probe.max_epochs", std::to_string(probe_max_epochs)},
      {"probe.patience", std::to_string(probe_patience)},
      {"eval.degree_thresholds", eval_degree_thresholds},
      {"out", out},
      {"seed", std::to_string(seed)},
      {"seeds", seeds},
  };
}

void RunConfig::validate() const {
  require_choice("task", task, {"lp", "nc-trans", "nc-ind"});
  require_choice("encoder.backbone", encoder_backbone, {"gat", "gcn"});
  require_choice("encoder.fusion", encoder_fusion, {"none", "early", "mid", "late", "all", "ews"});
  require_choice("encoder.phase_norm", encoder_phase_norm, {"union", "per-sign"});
  require_choice("encoder.init", encoder_init, {"random", "features"});
  require_choice("train.mode", train_mode, {"self", "supervised"});
  require_choice("loss.decay_mode", loss_decay_mode, {"complement", "literal"});
  require_choice("loss.distance", loss_distance, {"l1", "l2"});
  if (encoder_layers < 1) throw ConfigError("encoder.layers must be >= 1");
  if (encoder_dim < 1) throw ConfigError("encoder.dim must be >= 1");
  if (encoder_dropout < 0.0 || encoder_dropout >= 1.0)
    throw ConfigError("encoder.dropout must be in [0, 1)");
  if (train_lr <= 0.0) throw ConfigError("train.lr must be positive");
  if (probe_lr <= 0.0) throw ConfigError("probe.lr must be positive");
  if (train_max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (train_neg_ratio > 1.0)
    throw ConfigError("train.neg_ratio: non-edges sampled at most 1:1 with forward edges");
  if (train_neg_ratio < 0.0) throw ConfigError("train.neg_ratio must be >= 0");
  if (loss_lambda0 < 0.0) throw ConfigError("loss.lambda0 must be >= 0");
  if (loss_q < 0.0 || loss_q > 1.0) throw ConfigError("loss.q must be in [0, 1]");
  parse_ratio("split.ratio", split_ratio);
  parse_ratio("node_split.ratio", node_split_ratio);
  subtask_list();
  degree_threshold_list();
  seed_list();
}

EncoderConfig RunConfig::encoder_config(int input_dim) const {
  EncoderConfig e;
  e.layers = encoder_layers;
  e.dims.assign(encoder_layers + 1, encoder_dim);
  e.dims[0] = input_dim;
  e.backbone = encoder_backbone == "gcn" ? Backbone::GCN : Backbone::GAT;
  if (encoder_fusion == "none") e.fusion = Fusion::None;
  else if (encoder_fusion == "early") e.fusion = Fusion::Early;
  else if (encoder_fusion == "mid") e.fusion = Fusion::Mid;
  else if (encoder_fusion == "late") e.fusion = Fusion::Late;
  else if (encoder_fusion == "all") e.fusion = Fusion::All;
  else e.fusion = Fusion::EWS;
  e.phase_norm = encoder_phase_norm == "per-sign" ? PhaseNorm::PerSign : PhaseNorm::Union;
  e.dropout = encoder_dropout;
  e.leaky_slope = encoder_leaky_slope;
  e.validate();
  return e;
}

TrainConfig RunConfig::train_config(uint64_t run_seed) const {
  TrainConfig t;
  t.max_epochs = train_max_epochs;
  t.lr = train_lr;
  t.patience = train_patience;
  t.eval_every = train_eval_every;
  t.seed = run_seed;
  if (train_mode == "supervised")
    t.mode = task == "lp" ? TrainMode::SupervisedEdges : TrainMode::SupervisedNodes;
  else
    t.mode = TrainMode::SelfSupervised;
  t.schedule = schedule();
  t.distance = distance_enum();
  t.batch_size = train_batch_size;
  t.neg_ratio = train_neg_ratio;
  t.validate();
  return t;
}

LossSchedule RunConfig::schedule() const {
  LossSchedule s;
  s.lambda0 = loss_lambda0;
  s.q = loss_q;
  s.mode = loss_decay_mode == "literal" ? DecayMode::LiteralPower : DecayMode::ComplementPower;
  return s;
}

Distance RunConfig::distance_enum() const {
  return loss_distance == "l2" ? Distance::L2 : Distance::L1;
}

InitMode RunConfig::init_mode() const {
  return encoder_init == "features" ? InitMode::Features : InitMode::RandomNormal;
}

std::vector<Subtask> RunConfig::subtask_list() const {
  std::vector<Subtask> out;
  for (const std::string& s : split_list(subtasks, ',')) {
    if (s.empty()) continue;
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    out.push_back(subtask_from_string(lower));
  }
  if (out.empty()) throw ConfigError("subtasks: at least one of ep,dp,tp,fp required");
  return out;
}

std::vector<int> RunConfig::degree_threshold_list() const {
  std::vector<int> out;
  if (eval_degree_thresholds.empty()) return out;
  for (const std::string& s : split_list(eval_degree_thresholds, ',')) {
    if (s.empty()) continue;
    int t = parse_int("eval.degree_thresholds", s);
    if (t < 0) throw ConfigError("eval.degree_thresholds: thresholds must be >= 0");
    out.push_back(t);
  }
  return out;
}

std::vector<uint64_t> RunConfig::seed_list() const {
  if (seeds.empty()) return {seed};
  std::vector<uint64_t> out;
  auto dots = seeds.find("..");
  if (dots != std::string::npos) {
    uint64_t lo = parse_u64("seeds", seeds.substr(0, dots));
    uint64_t hi = parse_u64("seeds", seeds.substr(dots + 2));
    if (hi < lo) throw ConfigError("seeds: range end before start in '" + seeds + "'");
    if (hi - lo > 10000) throw ConfigError("seeds: range too large");
    for (uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const std::string& s : split_list(seeds, ',')) {
    if (s.empty()) continue;
    out.push_back(parse_u64("seeds", s));
  }
  if (out.empty()) throw ConfigError("seeds: empty list");
  return out;
}

std::string RunConfig::resolved_split_dir() const {
  return split_dir.empty() ? out + "/split" : split_dir;
}

std::array<int, 3> RunConfig::link_ratio() const { return parse_ratio("split.ratio", split_ratio); }

std::array<int, 3> RunConfig::node_ratio() const {
  return parse_ratio("node_split.ratio", node_split_ratio);
}

uint64_t RunConfig::config_hash() const {
  // Only keys that determine what a checkpoint contains; evaluation knobs,
  // output locations and seed lists can differ between train and eval runs.
  static const char* kCheckpointKeys[] = {
      "dataset.edges", "dataset.features", "dataset.num_nodes", "task", "split.ratio",
      "node_split.ratio", "encoder.layers", "encoder.dim", "encoder.backbone", "encoder.fusion",
      "encoder.phase_norm", "encoder.dropout", "encoder.leaky_slope", "encoder.init", "train.mode",
      "train.max_epochs", "train.lr", "train.patience", "train.eval_every", "train.batch_size",
      "train.neg_ratio", "loss.lambda0", "loss.q", "loss.decay_mode", "loss.distance"};
  auto all = flat();
  std::string blob;
  for (const char* k : kCheckpointKeys) {
    blob += k;
    blob += '=';
    blob += all.at(k);
    blob += '\n';
  }
  return fnv1a_str(blob);
}

std::string resolve_dataset_path(const std::string& path) {
  if (path.empty()) return path;
  if (fs::exists(path)) return path;
  if (!fs::path(path).is_absolute()) {
    if (const char* root = std::getenv("DUPLEX_DATA_DIR")) {
      fs::path candidate = fs::path(root) / path;
      if (fs::exists(candidate)) return candidate.string();
    }
  }
  return path;  // let the loader produce the error with the literal path
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

void write_run_manifest(const std::string& dir, const std::string& command, const RunConfig& cfg,
                        const std::vector<std::string>& input_files) {
  fs::create_directories(dir);
  json j;
  j["command"] = command;
  json c = json::object();
  for (const auto& [k, v] : cfg.flat()) c[k] = v;
  j["config"] = c;
  json inputs = json::object();
  for (const std::string& p : input_files)
    if (!p.empty() && fs::exists(p)) inputs[p] = hex64(hash_file(p));
  j["inputs"] = inputs;
  j["seeds"] = cfg.seed_list();
  std::ofstream out(dir + "/run_" + command + ".json");
  out << j.dump(2) << "\n";
}

namespace {

DiGraph load_dataset(const RunConfig& cfg, bool need_features) {
  if (cfg.dataset_edges.empty()) throw ConfigError("dataset.edges is required");
  std::string epath = resolve_dataset_path(cfg.dataset_edges);
  std::optional<int> n;
  if (cfg.dataset_num_nodes > 0) n = cfg.dataset_num_nodes;
  DiGraph g = load_edge_list(epath, n);
  if (!cfg.dataset_features.empty())
    load_features_labels(resolve_dataset_path(cfg.dataset_features), g);
  if (need_features && !g.has_labels())
    throw ConfigError("task '" + cfg.task + "' needs labels: set dataset.features");
  return g;
}

// Transductive node-classification runs train the encoder self-supervised on
// the whole graph: the link "split" is the full edge set with empty holdouts.
LinkSplit full_graph_split(const DiGraph& g) {
  LinkSplit s;
  s.train_edges = g.edges;
  s.train_graph = g;
  return s;
}

struct RunArtifacts {
  EncoderConfig ecfg;
  ComplexEmbedding init;
  EncoderParams params;
  AggIndex idx;
};

int encoder_input_dim(const RunConfig& cfg, const DiGraph& g) {
  if (cfg.init_mode() == InitMode::Features) {
    if (!g.has_features())
      throw ConfigError("encoder.init=features requires dataset.features with feature columns");
    return g.features.cols;
  }
  return cfg.encoder_dim;
}

// Rebuilds the architecture + fixed initial embeddings for one run seed the
// same way on the train and eval sides, so a checkpoint restores exactly.
RunArtifacts build_artifacts(const RunConfig& cfg, const DiGraph& full, const DiGraph& enc_graph,
                             uint64_t run_seed) {
  RunArtifacts a;
  a.ecfg = cfg.encoder_config(encoder_input_dim(cfg, full));
  a.init = init_embeddings(full, a.ecfg.dims[0], cfg.init_mode(), mix_seed(run_seed, kInitSalt));
  int edge_classes = 0, node_classes = 0;
  if (cfg.train_mode == "supervised" && cfg.task == "lp") edge_classes = 4;
  if (cfg.train_mode == "supervised" && cfg.task != "lp") node_classes = full.num_classes;
  a.params = init_params(a.ecfg, mix_seed(run_seed, kParamSalt), edge_classes, node_classes);
  a.idx = AggIndex::build(enc_graph);
  return a;
}

std::string seed_dir(const RunConfig& cfg, uint64_t run_seed) {
  return cfg.out + "/seed" + std::to_string(run_seed);
}

}  // namespace

int cmd_split(const RunConfig& cfg, bool force) {
  cfg.validate();
  DiGraph g = load_dataset(cfg, false);
  std::string dir = cfg.resolved_split_dir();
  if (fs::exists(dir + "/split.json") && !force)
    throw ConfigError("split output already exists at " + dir + " (use --force to overwrite)");

  LinkSplit split = split_edges(g, cfg.link_ratio(), cfg.seed);
  save_link_split(split, dir, cfg.seed, cfg.link_ratio());
  std::cout << "split: edges train=" << split.train_edges.size() << " val=" << split.val_edges.size()
            << " test=" << split.test_edges.size() << " -> " << dir << "\n";

  if (g.has_labels()) {
    NodeSplit ns = split_nodes(g, cfg.node_ratio(), cfg.seed);
    save_node_split(ns, dir, cfg.seed, cfg.node_ratio());
    std::cout << "split: nodes train=" << ns.train_nodes.size() << " val=" << ns.val_nodes.size()
              << " test=" << ns.test_nodes.size() << " -> " << dir << "\n";
  }
  write_run_manifest(dir, "split", cfg,
                     {resolve_dataset_path(cfg.dataset_edges),
                      resolve_dataset_path(cfg.dataset_features)});
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.task == "nc-ind")
    throw ConfigError("nc-ind trains inside the evaluation protocol; run `duplex eval --task nc-ind`");
  if (cfg.task == "nc-trans" && cfg.train_mode != "self")
    throw ConfigError("nc-trans embeddings are trained self-supervised; use train.mode=self");

  DiGraph g = load_dataset(cfg, cfg.task != "lp");

  LinkSplit split;
  if (cfg.task == "lp") {
    std::string dir = cfg.resolved_split_dir();
    if (fs::exists(dir + "/split.json")) {
      split = load_link_split(dir, g);
    } else {
      split = split_edges(g, cfg.link_ratio(), cfg.seed);
      save_link_split(split, dir, cfg.seed, cfg.link_ratio());
      std::cout << "split: created at " << dir << "\n";
    }
  } else {
    split = full_graph_split(g);
  }

  std::vector<double> best_vals, final_losses;
  for (uint64_t run_seed : cfg.seed_list()) {
    RunArtifacts art = build_artifacts(cfg, g, split.train_graph, run_seed);
    TrainConfig tcfg = cfg.train_config(run_seed);
    TrainInputs inputs;
    inputs.full_graph = &g;
    inputs.link_split = &split;

    std::string dir = seed_dir(cfg, run_seed);
    fs::create_directories(dir);
    std::ofstream csv(dir + "/train_log.csv");
    TrainResult res = train(inputs, art.init, art.ecfg, std::move(art.params), tcfg, &csv);

    save_checkpoint(res.params, dir, cfg.config_hash(), run_seed);
    save_embeddings(res.embedding, dir + "/embeddings.csv");
    write_run_manifest(dir, "train", cfg,
                       {resolve_dataset_path(cfg.dataset_edges),
                        resolve_dataset_path(cfg.dataset_features)});

    double final_loss = res.log.records.empty() ? 0.0 : res.log.records.back().train_loss;
    std::cout << "train: seed=" << run_seed << " best_epoch=" << res.best_epoch
              << " best_val=" << res.best_val << " final_train_loss=" << final_loss << " -> " << dir
              << "\n";
    best_vals.push_back(res.best_val);
    final_losses.push_back(final_loss);
  }

  if (best_vals.size() > 1) {
    json agg = {{"n_seeds", best_vals.size()},
                {"best_val_mean", mean_of(best_vals)},
                {"best_val_std", std_of(best_vals)},
                {"final_train_loss_mean", mean_of(final_losses)},
                {"final_train_loss_std", std_of(final_losses)}};
    std::ofstream(cfg.out + "/train_aggregate.json") << agg.dump(2) << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "train aggregate over %zu seeds: best_val=%.4f(%.4f)",
                  best_vals.size(), mean_of(best_vals), std_of(best_vals));
    std::cout << line << "\n";
  }
  return 0;
}

namespace {

struct SubtaskAccum {
  std::vector<double> auc, acc, macro, micro;
};

void print_report_line(const std::string& prefix, const MetricReport& r, bool with_auc) {
  char line[256];
  if (with_auc)
    std::snprintf(line, sizeof(line), "%s auc=%.4f acc=%.4f macro_f1=%.4f micro_f1=%.4f n=%d",
                  prefix.c_str(), r.auc, r.acc, r.macro_f1, r.micro_f1, r.n_samples);
  else
    std::snprintf(line, sizeof(line), "%s acc=%.4f macro_f1=%.4f micro_f1=%.4f n=%d",
                  prefix.c_str(), r.acc, r.macro_f1, r.micro_f1, r.n_samples);
  std::cout << line << "\n";
}

}  // namespace

int cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  DiGraph g = load_dataset(cfg, cfg.task != "lp");
  std::string sdir = cfg.resolved_split_dir();

  LinkSplit split;
  NodeSplit node_split;
  if (cfg.task == "lp") {
    if (!fs::exists(sdir + "/split.json"))
      throw ConfigError("no split manifest at " + sdir + "; run `duplex split` first");
    split = load_link_split(sdir, g);
  } else {
    if (fs::exists(sdir + "/node_split.json")) {
      node_split = load_node_split(sdir, g);
    } else {
      node_split = split_nodes(g, cfg.node_ratio(), cfg.seed);
      save_node_split(node_split, sdir, cfg.seed, cfg.node_ratio());
      std::cout << "split: node split created at " << sdir << "\n";
    }
  }

  // One fixed test-pair set per subtask, shared across run seeds.
  std::vector<Subtask> kinds = cfg.subtask_list();
  std::map<Subtask, std::vector<LabeledPair>> testsets;
  if (cfg.task == "lp")
    for (Subtask k : kinds)
      testsets[k] = build_subtask_testset(split, g, k,
                                          mix_seed(cfg.seed, kTestsetSalt + static_cast<int>(k)));

  std::map<std::string, SubtaskAccum> accum;
  for (uint64_t run_seed : cfg.seed_list()) {
    std::string dir = seed_dir(cfg, run_seed);

    if (cfg.task == "nc-ind") {
      EncoderConfig ecfg = cfg.encoder_config(encoder_input_dim(cfg, g));
      TrainConfig tcfg = cfg.train_config(run_seed);
      tcfg.mode = TrainMode::SupervisedNodes;
      MetricReport rep = inductive_protocol(g, node_split, ecfg, tcfg, run_seed);
      fs::create_directories(dir);
      std::ofstream(dir + "/eval_nc_ind.json") << rep.to_json() << "\n";
      print_report_line("eval: seed=" + std::to_string(run_seed) + " nc-ind", rep, false);
      auto& a = accum["nc-ind"];
      a.acc.push_back(rep.acc);
      a.macro.push_back(rep.macro_f1);
      a.micro.push_back(rep.micro_f1);
      continue;
    }

    if (!fs::exists(dir + "/checkpoint.json"))
      throw ConfigError("no checkpoint at " + dir + "; run `duplex train` first");

    const DiGraph& enc_graph = cfg.task == "lp" ? split.train_graph : g;
    RunArtifacts art = build_artifacts(cfg, g, enc_graph, run_seed);
    load_checkpoint(art.params, dir, cfg.config_hash());
    EmbeddingMatrices emb = encode_eval(enc_graph, art.idx, art.init, art.ecfg, art.params);

    if (cfg.task == "lp") {
      for (Subtask k : kinds) {
        MetricReport rep = score_subtask(emb, testsets[k], k, cfg.distance_enum());
        std::ofstream(dir + "/eval_" + subtask_name(k) + ".json") << rep.to_json() << "\n";
        print_report_line(
            "eval: seed=" + std::to_string(run_seed) + " " + subtask_name(k), rep,
            rep.has_auc);
        auto& a = accum[subtask_name(k)];
        if (rep.has_auc) a.auc.push_back(rep.auc);
        a.acc.push_back(rep.acc);
        a.macro.push_back(rep.macro_f1);
        a.micro.push_back(rep.micro_f1);
      }
      std::vector<int> thresholds = cfg.degree_threshold_list();
      if (!thresholds.empty()) {
        auto it = testsets.find(Subtask::EP);
        std::vector<LabeledPair> ep_pairs =
            it != testsets.end()
                ? it->second
                : build_subtask_testset(split, g, Subtask::EP, mix_seed(cfg.seed, kTestsetSalt));
        auto strata = degree_stratified_auc(emb, ep_pairs, g, thresholds, cfg.distance_enum());
        std::ofstream scsv(dir + "/degree_strata.csv");
        write_strata_csv(scsv, strata);
        std::cout << "eval: seed=" << run_seed << " degree strata -> " << dir
                  << "/degree_strata.csv\n";
      }
    } else {  // nc-trans
      ProbeConfig pc;
      pc.hidden = cfg.probe_hidden;
      pc.dropout = cfg.probe_dropout;
      pc.lr = cfg.probe_lr;
      pc.max_epochs = cfg.probe_max_epochs;
      pc.patience = cfg.probe_patience;
      MetricReport rep = transductive_probe(emb, g, node_split, pc, mix_seed(run_seed, kProbeSalt));
      std::ofstream(dir + "/eval_nc_trans.json") << rep.to_json() << "\n";
      print_report_line("eval: seed=" + std::to_string(run_seed) + " nc-trans", rep, false);
      auto& a = accum["nc-trans"];
      a.acc.push_back(rep.acc);
      a.macro.push_back(rep.macro_f1);
      a.micro.push_back(rep.micro_f1);
    }
  }

  if (cfg.seed_list().size() > 1) {
    json agg = json::object();
    for (const auto& [name, a] : accum) {
      json entry = {{"n_seeds", a.acc.size()},
                    {"acc_mean", mean_of(a.acc)},
                    {"acc_std", std_of(a.acc)},
                    {"macro_f1_mean", mean_of(a.macro)},
                    {"macro_f1_std", std_of(a.macro)},
                    {"micro_f1_mean", mean_of(a.micro)},
                    {"micro_f1_std", std_of(a.micro)}};
      if (!a.auc.empty()) {
        entry["auc_mean"] = mean_of(a.auc);
        entry["auc_std"] = std_of(a.auc);
      }
      agg[name] = entry;
      char line[200];
      if (!a.auc.empty())
        std::snprintf(line, sizeof(line), "eval aggregate %s: auc=%.4f(%.4f) acc=%.4f(%.4f)",
                      name.c_str(), mean_of(a.auc), std_of(a.auc), mean_of(a.acc), std_of(a.acc));
      else
        std::snprintf(line, sizeof(line),
                      "eval aggregate %s: acc=%.4f(%.4f) micro_f1=%.4f(%.4f)", name.c_str(),
                      mean_of(a.acc), std_of(a.acc), mean_of(a.micro), std_of(a.micro));
      std::cout << line << "\n";
    }
    std::ofstream(cfg.out + "/eval_aggregate.json") << agg.dump(2) << "\n";
  }
  write_run_manifest(cfg.out, "eval", cfg,
                     {resolve_dataset_path(cfg.dataset_edges),
                      resolve_dataset_path(cfg.dataset_features)});
  return 0;
}

int cmd_export(const RunConfig& cfg, const std::string& dest) {
  cfg.validate();
  uint64_t run_seed = cfg.seed_list().front();
  std::string dir = seed_dir(cfg, run_seed);
  if (!fs::exists(dir + "/checkpoint.json"))
    throw ConfigError("no checkpoint at " + dir + "; run `duplex train` first");

  DiGraph g = load_dataset(cfg, false);
  DiGraph enc_graph = g;
  if (cfg.task == "lp") {
    std::string sdir = cfg.resolved_split_dir();
    if (!fs::exists(sdir + "/split.json"))
      throw ConfigError("no split manifest at " + sdir + "; run `duplex split` first");
    enc_graph = load_link_split(sdir, g).train_graph;
  }
  RunArtifacts art = build_artifacts(cfg, g, enc_graph, run_seed);
  load_checkpoint(art.params, dir, cfg.config_hash());
  EmbeddingMatrices emb = encode_eval(enc_graph, art.idx, art.init, art.ecfg, art.params);

  std::string path = dest.empty() ? dir + "/embeddings_export.csv" : dest;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  save_embeddings(emb, path);
  std::cout << "export: " << emb.amplitude.rows << " nodes x " << emb.amplitude.cols
            << " dims -> " << path << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::vector<std::string>& ops, bool inject_fault) {
  auto results = gradcheck_suite(ops, inject_fault, cfg.seed);
  if (results.empty()) throw ConfigError("gradcheck: no cases match the requested ops");
  bool all_pass = true;
  for (const auto& r : results) {
    char line[220];
    std::snprintf(line, sizeof(line),
                  "gradcheck %-20s max_rel_err=%.3e tested=%-4d skipped=%-3d %s", r.name.c_str(),
                  r.report.max_rel_err, r.report.tested, r.report.skipped_kink,
                  r.pass ? "PASS" : "FAIL");
    std::cout << line << "\n";
    if (!r.pass) {
      std::cout << "  worst: " << r.report.argmax_param << "[" << r.report.argmax_index << "]\n";
      all_pass = false;
    }
  }
  std::cout << (all_pass ? "gradcheck: all cases pass" : "gradcheck: FAILURES present") << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace duplex
