#pragma once

#include <map>
#include <string>
#include <vector>

#include "duplex/common.hpp"
#include "duplex/encoder.hpp"
#include "duplex/eval.hpp"
#include "duplex/objective.hpp"
#include "duplex/trainer.hpp"

namespace duplex {

// Flat dotted-key run configuration. Every key has a default; unknown keys
// are rejected. Precedence: CLI flag > config file > default.
struct RunConfig {
  std::string dataset_edges;     // "src dst" edge list, required for most commands
  std::string dataset_features;  // optional per-node feature/label CSV
  int dataset_num_nodes = -1;    // -1 = infer from the edge list

  std::string task = "lp";  // lp | nc-trans | nc-ind
  std::string subtasks = "ep,dp,tp,fp";

  std::string split_dir;  // default <out>/split
  std::string split_ratio = "16:1:3";
  std::string node_split_ratio = "3:1:1";

  int encoder_layers = 3;
  int encoder_dim = 128;
  std::string encoder_backbone = "gat";    // gat | gcn
  std::string encoder_fusion = "none";     // none | early | mid | late | all | ews
  std::string encoder_phase_norm = "union";  // union | per-sign
  double encoder_dropout = 0.5;
  double encoder_leaky_slope = 0.2;
  std::string encoder_init = "random";  // random | features

  std::string train_mode = "self";  // self | supervised
  int train_max_epochs = 3000;
  double train_lr = 1e-3;
  int train_patience = 50;
  int train_eval_every = 5;
  int train_batch_size = 0;
  double train_neg_ratio = 1.0;

  double loss_lambda0 = 0.1;
  double loss_q = 0.01;
  std::string loss_decay_mode = "complement";  // complement | literal
  std::string loss_distance = "l1";            // l1 | l2

  int probe_hidden = 128;
  double probe_dropout = 0.5;
  double probe_lr = 1e-2;
  int probe_max_epochs = 3000;
  int probe_patience = 50;

  std::string eval_degree_thresholds;  // e.g. "1,2,3,5,10"; empty = skip strata

  std::string out = "runs/out";
  uint64_t seed = 0;
  std::string seeds;  // "0,1,2" or "0..9"; when set, overrides `seed`

  void set(const std::string& key, const std::string& value);
  static RunConfig from_file(const std::string& path);
  std::map<std::string, std::string> flat() const;
  void validate() const;

  EncoderConfig encoder_config(int input_dim) const;
  TrainConfig train_config(uint64_t run_seed) const;
  LossSchedule schedule() const;
  Distance distance_enum() const;
  InitMode init_mode() const;
  std::vector<Subtask> subtask_list() const;
  std::vector<int> degree_threshold_list() const;
  std::vector<uint64_t> seed_list() const;
  std::string resolved_split_dir() const;
  std::array<int, 3> link_ratio() const;
  std::array<int, 3> node_ratio() const;
  uint64_t config_hash() const;  // over flat(), for checkpoint manifests
};

// Relative dataset paths resolve against DUPLEX_DATA_DIR when it is set and
// the path does not exist as given.
std::string resolve_dataset_path(const std::string& path);

uint64_t hash_file(const std::string& path);

// run.json: command, full flat config, content hash per input file. No
// timestamps, so reruns produce byte-identical manifests.
void write_run_manifest(const std::string& dir, const std::string& command, const RunConfig& cfg,
                        const std::vector<std::string>& input_files);

int cmd_split(const RunConfig& cfg, bool force);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_export(const RunConfig& cfg, const std::string& dest);
int cmd_gradcheck(const RunConfig& cfg, const std::vector<std::string>& ops, bool inject_fault);

}  // namespace duplex
