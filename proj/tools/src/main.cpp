// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chansr/error.hpp"
#include "chansr_cli/commands.hpp"
#include "chansr_cli/run_config.hpp"

namespace {

using namespace chansr::cli;

struct Overrides {
  std::string config;
  std::optional<int> scenes, grid;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, data, scale, epochs, stage, from, run_dir, checkpoint,
      variants, seeds;
  std::optional<double> lr;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file (keys listed below)");
  cmd->add_option("--data", o.data, "dataset directory (dataset.dir)");
  cmd->footer(describe_keys());
}

RunConfig resolve(const std::string& command, const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.scenes) c.generate.scenes = *o.scenes;
  if (o.grid) c.generate.grid = *o.grid;
  if (o.seed) c.generate.scene_seed = *o.seed;
  if (o.data) c.data_dir = *o.data;
  if (o.out) {
    if (command == "generate") c.data_dir = *o.out;
    else if (command == "train") c.run_dir = *o.out;
    else c.eval_dir = *o.out;
  }
  if (o.scale) {
    const auto scales = parse_int_list(*o.scale);
    if (command == "train") c.train_scales = scales;
    else if (command == "evaluate") c.eval_scales = scales;
    else if (command == "ablate") {
      if (scales.size() != 1) throw ConfigError("ablate takes a single --scale");
      c.ablation_scale = scales.front();
    } else {
      c.generate.scales = scales;
    }
  }
  if (o.epochs) {
    const auto e = parse_int_list(*o.epochs);
    if (e.size() != 2) throw ConfigError("--epochs expects PRETRAIN,FINETUNE");
    c.train.epochs_pretrain = e[0];
    c.train.epochs_finetune = e[1];
  }
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.stage) c.stage = *o.stage;
  if (o.from) c.from = *o.from;
  if (o.run_dir) c.run_dir = *o.run_dir;
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.variants) c.variants = parse_string_list(*o.variants);
  if (o.seeds) c.seeds = parse_seed_list(*o.seeds);
  if (!c.train_scales.empty()) c.train.scale = c.train_scales.front();
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-map super-resolution: generate, train, evaluate, ablate"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  add_common(gen, o);
  gen->add_option("--scenes", o.scenes, "number of scenes (scene.scenes)");
  gen->add_option("--grid", o.grid, "grid side in cells (scene.grid)");
  gen->add_option("--seed", o.seed, "scene seed (scene.seed)");
  gen->add_option("--out", o.out, "output directory (dataset.dir)");

  auto* tr = app.add_subcommand("train", "Two-stage training");
  add_common(tr, o);
  tr->add_option("--scale", o.scale, "scale factors, e.g. 2,4,8 (train.scales)");
  tr->add_option("--epochs", o.epochs, "PRETRAIN,FINETUNE epochs (train.epochs)");
  tr->add_option("--lr", o.lr, "learning rate (train.learning_rate)");
  tr->add_option("--stage", o.stage, "pretrain | finetune | both (train.stage)");
  tr->add_option("--from", o.from, "pre-trained checkpoint for --stage finetune");
  tr->add_option("--out,--run-dir", o.run_dir, "run directory (train.run_dir)");

  auto* ev = app.add_subcommand("evaluate", "Model and bilinear metrics");
  add_common(ev, o);
  ev->add_option("--scale", o.scale, "scale factors (eval.scales)");
  ev->add_option("--run-dir", o.run_dir, "run directory holding s<S>/finetune.ckpt");
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint path; {s} expands to the scale");
  ev->add_option("--out", o.out, "report directory (eval.out)");

  auto* ab = app.add_subcommand("ablate", "STL / MTL / MTL+RES / MTL+RES+DA grid");
  add_common(ab, o);
  ab->add_option("--variants", o.variants, "comma-separated variants (eval.variants)");
  ab->add_option("--seeds", o.seeds, "comma-separated seeds (eval.seeds)");
  ab->add_option("--scale", o.scale, "scale factor (eval.ablation_scale)");
  ab->add_option("--epochs", o.epochs, "PRETRAIN,FINETUNE epochs per run (train.epochs)");
  ab->add_option("--lr", o.lr, "learning rate (train.learning_rate)");
  ab->add_option("--out", o.out, "report directory (eval.out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig config = resolve(command, o);
    if (command == "generate") return cmd_generate(config, std::cout);
    if (command == "train") return cmd_train(config, std::cout);
    if (command == "evaluate") return cmd_evaluate(config, std::cout);
    return cmd_ablate(config, std::cout);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
