#include <deque>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "duplex/cli.hpp"

namespace {

// Binds CLI flags onto flat config keys; flags override the config file,
// which overrides defaults. --set catches any key without a dedicated flag.
struct CommandCtx {
  std::string config_path;
  std::vector<std::string> sets;
  struct FlagBind {
    std::string key, value;
    CLI::Option* opt = nullptr;
  };
  std::deque<FlagBind> binds;
  CLI::Option* config_opt = nullptr;

  void bind(CLI::App* cmd, const std::string& flag, std::string key, const std::string& help) {
    binds.push_back({std::move(key), "", nullptr});
    auto& fb = binds.back();
    fb.opt = cmd->add_option(flag, fb.value, help);
  }

  void add_common(CLI::App* cmd) {
    config_opt = cmd->add_option("--config", config_path, "JSON config file (flat dotted keys)");
    bind(cmd, "--seed", "seed", "base RNG seed");
    bind(cmd, "--seeds", "seeds", "seed list 'a,b,c' or range 'a..b'");
    bind(cmd, "--task", "task", "lp | nc-trans | nc-ind");
    bind(cmd, "--subtask", "subtasks", "comma list from ep,dp,tp,fp");
    bind(cmd, "--fusion", "encoder.fusion", "none | early | mid | late | all | ews");
    bind(cmd, "--backbone", "encoder.backbone", "gat | gcn");
    bind(cmd, "--distance", "loss.distance", "l1 | l2");
    bind(cmd, "--lambda0", "loss.lambda0", "connection-loss base weight");
    bind(cmd, "--q", "loss.q", "connection-loss decay parameter");
    bind(cmd, "--decay-mode", "loss.decay_mode", "complement | literal");
    bind(cmd, "--degree-thresholds", "eval.degree_thresholds", "comma list for EP strata");
    bind(cmd, "--out", "out", "output directory");
    cmd->add_option("--set", sets, "extra key=value config overrides");
  }

  duplex::RunConfig build() const {
    duplex::RunConfig cfg;
    if (config_opt != nullptr && config_opt->count() > 0)
      cfg = duplex::RunConfig::from_file(config_path);
    for (const auto& fb : binds)
      if (fb.opt->count() > 0) cfg.set(fb.key, fb.value);
    for (const std::string& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw duplex::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

std::vector<std::string> comma_split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duplex: directed-graph embeddings with dual amplitude/phase encoders"};
  app.require_subcommand(1);

  CommandCtx split_ctx, train_ctx, eval_ctx, export_ctx, grad_ctx;
  bool force = false;
  bool inject_fault = false;
  std::string dest, ops_arg;

  auto* sc_split = app.add_subcommand("split", "write train/val/test splits for a dataset");
  split_ctx.add_common(sc_split);
  sc_split->add_flag("--force", force, "overwrite an existing split directory");

  auto* sc_train = app.add_subcommand("train", "train the encoder and write run artifacts");
  train_ctx.add_common(sc_train);

  auto* sc_eval = app.add_subcommand("eval", "evaluate checkpoints on the requested subtasks");
  eval_ctx.add_common(sc_eval);

  auto* sc_export = app.add_subcommand("export", "re-encode a checkpoint and write embeddings CSV");
  export_ctx.add_common(sc_export);
  sc_export->add_option("--dest", dest, "destination CSV path");

  auto* sc_grad = app.add_subcommand("gradcheck", "finite-difference check of every operator");
  grad_ctx.add_common(sc_grad);
  sc_grad->add_option("--ops", ops_arg, "comma list of case names to run (default: all)");
  sc_grad->add_flag("--inject-fault", inject_fault,
                    "corrupt one analytic gradient (negative control; must fail)");

  int rc = 0;
  sc_split->callback([&] { rc = duplex::cmd_split(split_ctx.build(), force); });
  sc_train->callback([&] { rc = duplex::cmd_train(train_ctx.build()); });
  sc_eval->callback([&] { rc = duplex::cmd_eval(eval_ctx.build()); });
  sc_export->callback([&] { rc = duplex::cmd_export(export_ctx.build(), dest); });
  sc_grad->callback(
      [&] { rc = duplex::cmd_gradcheck(grad_ctx.build(), comma_split(ops_arg), inject_fault); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, help exits 0
  } catch (const duplex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
