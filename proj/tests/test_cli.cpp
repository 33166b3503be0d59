#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "duplex/trainer.hpp"

using json = nlohmann::json;
using duplex::EmbeddingMatrices;
using duplex::load_embeddings;
namespace fs = std::filesystem;

namespace {

// The binary under test, injected by the build.
std::string duplex_bin() {
  const char* p = std::getenv("DUPLEX_BIN");
  REQUIRE_MESSAGE(p != nullptr, "DUPLEX_BIN must point at the duplex binary");
  return p;
}

struct RunOutput {
  int code = -1;
  std::string text;
};

RunOutput run_cli(const std::string& args) {
  static int counter = 0;
  fs::path log = fs::temp_directory_path() / ("duplex_cli_out_" + std::to_string(counter++) + ".txt");
  std::string cmd = duplex_bin() + " " + args + " > " + log.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  RunOutput out;
  out.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  out.text = ss.str();
  fs::remove(log);
  return out;
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("duplex_clitest_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 20 distinct directed edges over 10 nodes.
fs::path write_edge_file(const fs::path& dir, int n_edges = 20, int n_nodes = 10,
                         uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  std::set<std::pair<int, int>> seen;
  std::ostringstream body;
  while (static_cast<int>(seen.size()) < n_edges) {
    int u = static_cast<int>(rng() % n_nodes), v = static_cast<int>(rng() % n_nodes);
    if (u != v && seen.insert({u, v}).second) body << u << " " << v << "\n";
  }
  fs::path p = dir / "edges.txt";
  std::ofstream out(p);
  out << body.str();
  return p;
}

size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small but trainable setup shared by the pipeline-facing cases.
std::string tiny_train_flags() {
  return " --set encoder.layers=2 --set encoder.dim=6 --set encoder.dropout=0"
         " --set train.max_epochs=12 --set train.patience=12 --set train.eval_every=4";
}

}  // namespace

TEST_CASE("split writes the three edge files at the agreed ratio") {
  fs::path dir = temp_dir("split");
  fs::path edges = write_edge_file(dir);
  fs::path out = dir / "run";
  RunOutput r = run_cli("split --set dataset.edges=" + edges.string() + " --out " + out.string());
  CHECK(r.code == 0);
  fs::path split_dir = out / "split";
  CHECK(line_count(split_dir / "train_edges.txt") == 16);
  CHECK(line_count(split_dir / "val_edges.txt") == 1);
  CHECK(line_count(split_dir / "test_edges.txt") == 3);
  CHECK(fs::exists(split_dir / "split.json"));
  CHECK(fs::exists(split_dir / "run_split.json"));

  // identical rerun in a fresh directory reproduces the files byte for byte
  fs::path out2 = dir / "run2";
  RunOutput r2 = run_cli("split --set dataset.edges=" + edges.string() + " --out " + out2.string());
  CHECK(r2.code == 0);
  CHECK(slurp(split_dir / "train_edges.txt") == slurp(out2 / "split" / "train_edges.txt"));
  CHECK(slurp(split_dir / "split.json") == slurp(out2 / "split" / "split.json"));
}

TEST_CASE("split refuses to clobber an existing split without force") {
  fs::path dir = temp_dir("split_force");
  fs::path edges = write_edge_file(dir);
  fs::path out = dir / "run";
  CHECK(run_cli("split --set dataset.edges=" + edges.string() + " --out " + out.string()).code == 0);
  RunOutput again =
      run_cli("split --set dataset.edges=" + edges.string() + " --out " + out.string());
  CHECK(again.code == 2);
  CHECK(again.text.find("--force") != std::string::npos);
  RunOutput forced =
      run_cli("split --force --set dataset.edges=" + edges.string() + " --out " + out.string());
  CHECK(forced.code == 0);
}

TEST_CASE("missing inputs and unknown keys exit with usage errors") {
  fs::path dir = temp_dir("errors");
  RunOutput missing = run_cli("split --set dataset.edges=" + (dir / "nope.txt").string() +
                              " --out " + (dir / "o").string());
  CHECK(missing.code != 0);
  RunOutput unknown = run_cli("split --set dataset.banana=1 --out " + (dir / "o2").string());
  CHECK(unknown.code == 2);
  CHECK(unknown.text.find("unknown config key") != std::string::npos);
  RunOutput badsub = run_cli("frobnicate");
  CHECK(badsub.code == 2);
  RunOutput badratio = run_cli("split --set split.ratio=16:1 --out " + (dir / "o3").string());
  CHECK(badratio.code == 2);
}

TEST_CASE("config files layer under command-line flags") {
  fs::path dir = temp_dir("config");
  fs::path edges = write_edge_file(dir);
  json cfg = {{"dataset.edges", edges.string()},
              {"encoder.dim", 6},
              {"encoder.layers", 2},
              {"encoder.dropout", 0.0},
              {"train.max_epochs", 8},
              {"train.patience", 8},
              {"train.eval_every", 4},
              {"out", (dir / "from_config").string()}};
  fs::path cfg_path = dir / "cfg.json";
  std::ofstream(cfg_path) << cfg.dump(2);
  RunOutput r = run_cli("train --config " + cfg_path.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "from_config" / "seed0" / "checkpoint.bin"));

  // a flag overrides the same key from the file
  RunOutput over = run_cli("train --config " + cfg_path.string() + " --out " +
                           (dir / "overridden").string());
  CHECK(over.code == 0);
  CHECK(fs::exists(dir / "overridden" / "seed0" / "checkpoint.bin"));

  std::ofstream(dir / "bad.json") << "{\"train.max_epochs\": \"soon\"}";
  RunOutput bad = run_cli("train --config " + (dir / "bad.json").string());
  CHECK(bad.code == 2);
}

TEST_CASE("train leaves the full artifact set and is reproducible") {
  fs::path dir = temp_dir("train");
  fs::path edges = write_edge_file(dir, 30, 12, 7);
  std::string base = "--set dataset.edges=" + edges.string() + tiny_train_flags();
  fs::path out = dir / "runA";
  RunOutput r = run_cli("train " + base + " --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.text.find("train: seed=0") != std::string::npos);
  for (const char* f : {"checkpoint.bin", "checkpoint.json", "embeddings.csv", "train_log.csv",
                        "run_train.json"})
    CHECK(fs::exists(out / "seed0" / f));
  CHECK(fs::exists(out / "split" / "split.json"));  // auto-created

  fs::path out2 = dir / "runB";
  RunOutput r2 = run_cli("train " + base + " --out " + out2.string());
  CHECK(r2.code == 0);
  CHECK(slurp(out / "seed0" / "train_log.csv") == slurp(out2 / "seed0" / "train_log.csv"));
  CHECK(slurp(out / "seed0" / "checkpoint.json") == slurp(out2 / "seed0" / "checkpoint.json"));
  CHECK(slurp(out / "run_train.json") == slurp(out2 / "run_train.json"));
}

TEST_CASE("multi-seed training aggregates the per-seed results") {
  fs::path dir = temp_dir("seeds");
  fs::path edges = write_edge_file(dir, 30, 12, 9);
  fs::path out = dir / "run";
  RunOutput r = run_cli("train --seeds 0,1,2 --set dataset.edges=" + edges.string() +
                        tiny_train_flags() + " --out " + out.string());
  CHECK(r.code == 0);
  for (int s : {0, 1, 2}) {
    CHECK(fs::exists(out / ("seed" + std::to_string(s)) / "checkpoint.bin"));
  }
  CHECK(fs::exists(out / "train_aggregate.json"));
  json agg = json::parse(slurp(out / "train_aggregate.json"));
  CHECK(agg["n_seeds"] == 3);
  CHECK(agg.contains("best_val_mean"));
  CHECK(agg.contains("best_val_std"));
  CHECK(r.text.find("train aggregate over 3 seeds") != std::string::npos);
}

TEST_CASE("eval reports all four subtasks and writes degree strata") {
  fs::path dir = temp_dir("eval");
  fs::path edges = write_edge_file(dir, 60, 14, 11);
  fs::path out = dir / "run";
  std::string base = "--set dataset.edges=" + edges.string() + tiny_train_flags() + " --out " +
                     out.string();
  REQUIRE(run_cli("train " + base).code == 0);
  RunOutput ev = run_cli("eval " + base + " --degree-thresholds 1,3,100");
  CHECK(ev.code == 0);
  for (const char* sub : {"ep", "dp", "tp", "fp"}) {
    CHECK(ev.text.find("eval: seed=0 " + std::string(sub)) != std::string::npos);
    fs::path rep = out / "seed0" / ("eval_" + std::string(sub) + ".json");
    REQUIRE_MESSAGE(fs::exists(rep), rep.string());
    json j = json::parse(slurp(rep));
    CHECK(j.contains("acc"));
    CHECK(j["n_samples"].get<int>() > 0);
  }
  fs::path strata = out / "seed0" / "degree_strata.csv";
  REQUIRE(fs::exists(strata));
  CHECK(line_count(strata) == 4);  // header + one row per threshold

  // eval in a fresh directory is a usage error: no split yet
  RunOutput cold = run_cli("eval --set dataset.edges=" + edges.string() + tiny_train_flags() +
                           " --out " + (dir / "cold").string());
  CHECK(cold.code == 2);
  CHECK(cold.text.find("duplex split") != std::string::npos);

  // with a split but no checkpoint the error points at train
  REQUIRE(run_cli("split --set dataset.edges=" + edges.string() + " --out " +
                  (dir / "cold").string())
              .code == 0);
  RunOutput no_ckpt = run_cli("eval --set dataset.edges=" + edges.string() + tiny_train_flags() +
                              " --out " + (dir / "cold").string());
  CHECK(no_ckpt.code == 2);
  CHECK(no_ckpt.text.find("duplex train") != std::string::npos);
}

TEST_CASE("eval on multiple seeds writes an aggregate report") {
  fs::path dir = temp_dir("eval_seeds");
  fs::path edges = write_edge_file(dir, 60, 14, 13);
  fs::path out = dir / "run";
  std::string base = "--seeds 0,1 --set dataset.edges=" + edges.string() + tiny_train_flags() +
                     " --out " + out.string() + " --subtask ep,dp";
  REQUIRE(run_cli("train " + base).code == 0);
  RunOutput ev = run_cli("eval " + base);
  CHECK(ev.code == 0);
  REQUIRE(fs::exists(out / "eval_aggregate.json"));
  json agg = json::parse(slurp(out / "eval_aggregate.json"));
  CHECK(agg.contains("ep"));
  CHECK(agg.contains("dp"));
  CHECK(!agg.contains("tp"));
  CHECK(agg["ep"]["n_seeds"] == 2);
  CHECK(agg["ep"].contains("acc_mean"));
  CHECK(agg["ep"].contains("auc_mean"));
  CHECK(ev.text.find("eval aggregate ep:") != std::string::npos);
  CHECK(ev.text.find("eval aggregate dp:") != std::string::npos);
}

TEST_CASE("node tasks on an unlabeled dataset are usage errors") {
  fs::path dir = temp_dir("nolabels");
  fs::path edges = write_edge_file(dir);
  RunOutput r = run_cli("train --task nc-trans --set dataset.edges=" + edges.string() +
                        tiny_train_flags() + " --out " + (dir / "o").string());
  CHECK(r.code == 2);
  RunOutput ind = run_cli("eval --task nc-ind --set dataset.edges=" + edges.string() +
                          tiny_train_flags() + " --out " + (dir / "o2").string());
  CHECK(ind.code == 2);
}

TEST_CASE("node classification runs end to end on a labeled dataset") {
  fs::path dir = temp_dir("labeled");
  // ring of 12 nodes, two alternating-block classes, 3 features
  std::ofstream edges(dir / "edges.txt");
  for (int i = 0; i < 12; ++i) edges << i << " " << (i + 1) % 12 << "\n";
  edges.close();
  std::ofstream feat(dir / "feat.csv");
  std::mt19937_64 rng(15);
  std::normal_distribution<double> N;
  for (int i = 0; i < 12; ++i) {
    int label = (i / 6) % 2;
    feat << i << "," << label;
    for (int c = 0; c < 3; ++c) feat << "," << (0.2 * N(rng) + (c % 2 == label ? 1.0 : 0.0));
    feat << "\n";
  }
  feat.close();
  std::string base = "--set dataset.edges=" + (dir / "edges.txt").string() +
                     " --set dataset.features=" + (dir / "feat.csv").string() +
                     " --set encoder.layers=2 --set encoder.dim=4 --set encoder.dropout=0"
                     " --set train.max_epochs=10 --set train.patience=10"
                     " --set train.eval_every=5 --set probe.max_epochs=40"
                     " --set probe.patience=40 --set probe.hidden=8 --set probe.dropout=0";
  fs::path out = dir / "trans";
  RunOutput tr = run_cli("train --task nc-trans " + base + " --out " + out.string());
  CHECK(tr.code == 0);
  RunOutput ev = run_cli("eval --task nc-trans " + base + " --out " + out.string());
  CHECK(ev.code == 0);
  REQUIRE(fs::exists(out / "seed0" / "eval_nc_trans.json"));
  json j = json::parse(slurp(out / "seed0" / "eval_nc_trans.json"));
  CHECK(j.contains("micro_f1"));
  CHECK(fs::exists(out / "split" / "node_split.json"));

  fs::path ind_out = dir / "ind";
  RunOutput ind = run_cli("eval --task nc-ind " + base + " --out " + ind_out.string());
  CHECK(ind.code == 0);
  CHECK(fs::exists(ind_out / "seed0" / "eval_nc_ind.json"));

  // nc-ind training is defined inside the evaluation protocol only
  RunOutput ind_train = run_cli("train --task nc-ind " + base + " --out " +
                                (dir / "ind_train").string());
  CHECK(ind_train.code == 2);
  CHECK(ind_train.text.find("eval") != std::string::npos);
}

TEST_CASE("export re-encodes a checkpoint into a readable embedding file") {
  fs::path dir = temp_dir("export");
  fs::path edges = write_edge_file(dir, 30, 12, 17);
  fs::path out = dir / "run";
  std::string base = "--set dataset.edges=" + edges.string() + tiny_train_flags() + " --out " +
                     out.string();
  REQUIRE(run_cli("train " + base).code == 0);
  fs::path dest = dir / "emb.csv";
  RunOutput ex = run_cli("export " + base + " --dest " + dest.string());
  CHECK(ex.code == 0);
  CHECK(ex.text.find("export: 12 nodes x 6 dims") != std::string::npos);
  REQUIRE(fs::exists(dest));
  EmbeddingMatrices exported = load_embeddings(dest.string());
  CHECK(exported.amplitude.rows == 12);
  CHECK(exported.amplitude.cols == 6);

  // the export equals the embeddings the trainer wrote, coordinate for coordinate
  EmbeddingMatrices trained = load_embeddings((out / "seed0" / "embeddings.csv").string());
  REQUIRE(trained.amplitude.v.size() == exported.amplitude.v.size());
  for (size_t i = 0; i < trained.amplitude.v.size(); ++i) {
    CHECK(exported.amplitude.v[i] == doctest::Approx(trained.amplitude.v[i]).epsilon(1e-12));
    CHECK(exported.phase.v[i] == doctest::Approx(trained.phase.v[i]).epsilon(1e-12));
  }

  RunOutput cold = run_cli("export --set dataset.edges=" + edges.string() + tiny_train_flags() +
                           " --out " + (dir / "cold").string());
  CHECK(cold.code == 2);
}

TEST_CASE("gradcheck passes clean and fails loudly when sabotaged") {
  RunOutput ok = run_cli("gradcheck --ops relu,matmul,loss_direction");
  CHECK(ok.code == 0);
  CHECK(ok.text.find("gradcheck: all cases pass") != std::string::npos);
  CHECK(ok.text.find("relu") != std::string::npos);
  CHECK(ok.text.find("PASS") != std::string::npos);

  RunOutput bad = run_cli("gradcheck --ops matmul --inject-fault");
  CHECK(bad.code == 1);
  CHECK(bad.text.find("FAIL") != std::string::npos);
  CHECK(bad.text.find("matmul") != std::string::npos);

  RunOutput none = run_cli("gradcheck --ops not_an_op");
  CHECK(none.code == 2);
}
