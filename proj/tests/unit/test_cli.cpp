// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "chansr/checkpoint.hpp"
#include "chansr/dataset.hpp"
#include "chansr_cli/commands.hpp"
#include "chansr_cli/run_config.hpp"
#include "test_util.hpp"

using namespace chansr;
using namespace chansr::cli;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const fs::path& root) {
  RunConfig c;
  c.generate.scenes = 6;
  c.generate.grid = 16;
  c.data_dir = (root / "data").string();
  c.run_dir = (root / "train").string();
  c.eval_dir = (root / "eval").string();
  c.train.epochs_pretrain = 1;
  c.train.epochs_finetune = 1;
  c.train.learning_rate = 1e-3;
  c.train.augmentation = false;
  c.train.eval_every_epoch = false;
  c.eval_scales = {2, 4};
  c.train_scales = {2, 4};
  return c;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHANSR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(RunConfigJson, DefaultsRoundTrip) {
  const RunConfig d;
  const auto back = config_from_json(to_json(d));
  EXPECT_EQ(to_json(back), to_json(d));
  EXPECT_EQ(d.train.epochs_pretrain, 100);
  EXPECT_EQ(d.train.learning_rate, 1e-5);
  EXPECT_EQ(d.generate.scenes, 60);
  EXPECT_EQ(d.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(RunConfigJson, OverlayAndStrictKeys) {
  const auto c = config_from_json(R"({"train": {"epochs": [3, 4], "learning_rate": 0.01},
                                      "model": {"residual": false}})");
  EXPECT_EQ(c.train.epochs_pretrain, 3);
  EXPECT_EQ(c.train.epochs_finetune, 4);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_FALSE(c.arch.residual);
  EXPECT_EQ(c.generate.grid, 64);
  EXPECT_THROW(config_from_json(R"({"train": {"epoch": 3}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"trainer": {}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"train": {"learning_rate": "fast"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"train": {"batch_size": 8}})"), ConfigError);
  EXPECT_THROW(config_from_json("{"), ConfigError);
}

TEST(RunConfigJson, DescribeKeysListsSections) {
  const auto keys = describe_keys();
  for (const char* k : {"scene.scenes", "dataset.scales", "model.n_blocks", "train.epochs",
                        "eval.checkpoint"})
    EXPECT_NE(keys.find(k), std::string::npos) << k;
}

TEST(RunConfigJson, ListParsers) {
  EXPECT_EQ(parse_int_list("2,4,8"), (std::vector<int>{2, 4, 8}));
  EXPECT_EQ(parse_seed_list("1, 2,3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_string_list("STL,MTL+RES"), (std::vector<std::string>{"STL", "MTL+RES"}));
  EXPECT_THROW(parse_int_list("2,x"), ConfigError);
  EXPECT_THROW(parse_int_list(""), ConfigError);
}

TEST(CheckpointPath, Placeholder) {
  RunConfig c;
  c.run_dir = "r";
  EXPECT_EQ(checkpoint_for_scale(c, 4), fs::path("r/s4/finetune.ckpt"));
  c.checkpoint = "ck/x{s}/m.ckpt";
  EXPECT_EQ(checkpoint_for_scale(c, 8), fs::path("ck/x8/m.ckpt"));
}

TEST(Commands, GenerateTrainEvaluateAblate) {
  fixtures::TempDir dir;
  auto c = tiny(dir.path());
  std::ostringstream out;
  ASSERT_EQ(cmd_generate(c, out), kExitOk);
  const auto ds = dataset::load_dataset(c.data_dir);
  EXPECT_EQ(ds.size(), 6u);
  EXPECT_TRUE(fs::exists(fs::path(c.data_dir) / "resolved_config.json"));

  ASSERT_EQ(cmd_train(c, out), kExitOk);
  for (int s : {2, 4}) {
    const auto sd = fs::path(c.run_dir) / ("s" + std::to_string(s));
    EXPECT_TRUE(fs::exists(sd / "pretrain.ckpt"));
    EXPECT_TRUE(fs::exists(sd / "finetune.ckpt"));
    EXPECT_EQ(line_count(sd / "train_log.jsonl"), 2u);
  }

  ASSERT_EQ(cmd_evaluate(c, out), kExitOk);
  // Model and bilinear rows per scale.
  EXPECT_EQ(line_count(fs::path(c.eval_dir) / "eval_x2-4_seed1.jsonl"), 4u);
  EXPECT_TRUE(fs::exists(fs::path(c.eval_dir) / "eval_x2-4_seed1.txt"));

  c.max_pl_mae_ratio = 0.0;
  EXPECT_EQ(cmd_evaluate(c, out), kExitThreshold);
  c.max_pl_mae_ratio.reset();

  c.variants = {"MTL", "STL"};
  c.seeds = {1};
  ASSERT_EQ(cmd_ablate(c, out), kExitOk);
  // One run line and one summary line per variant.
  EXPECT_EQ(line_count(fs::path(c.eval_dir) / "ablation_x2_seeds1.jsonl"), 4u);
}

TEST(Commands, FinetuneResumesFromPretrain) {
  fixtures::TempDir dir;
  auto c = tiny(dir.path());
  c.train_scales = {2};
  std::ostringstream out;
  ASSERT_EQ(cmd_generate(c, out), kExitOk);
  c.stage = "pretrain";
  ASSERT_EQ(cmd_train(c, out), kExitOk);
  const auto sd = fs::path(c.run_dir) / "s2";
  EXPECT_FALSE(fs::exists(sd / "finetune.ckpt"));
  const auto pre = train::load_checkpoint(sd / "pretrain.ckpt");

  c.stage = "finetune";
  c.from = (sd / "pretrain.ckpt").string();
  ASSERT_EQ(cmd_train(c, out), kExitOk);
  const auto fine = train::load_checkpoint(sd / "finetune.ckpt");
  EXPECT_EQ(fine.stage, train::Stage::kFinetune);
  EXPECT_EQ(pre.params.blocks, fine.params.blocks);

  // A scale-4 run cannot start from a scale-2 checkpoint.
  c.train_scales = {4};
  EXPECT_THROW(cmd_train(c, out), ConfigMismatchError);
}

#ifdef CHANSR_CLI_PATH
TEST(Binary, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli("generate --scenes 0"), 1);
  EXPECT_EQ(run_cli("nonsense"), 1);
  EXPECT_EQ(run_cli("train --config /nonexistent/cfg.json"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Binary, GenerateIsDeterministic) {
  fixtures::TempDir dir;
  const auto a = dir.path() / "a", b = dir.path() / "b";
  ASSERT_EQ(run_cli("generate --scenes 3 --grid 16 --seed 5 --data " + a.string()), 0);
  ASSERT_EQ(run_cli("generate --scenes 3 --grid 16 --seed 5 --data " + b.string()), 0);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "scene_0001.bin"), slurp(b / "scene_0001.bin"));
}

TEST(Binary, MissingCheckpointIsRuntimeError) {
  fixtures::TempDir dir;
  const auto d = dir.path() / "d";
  ASSERT_EQ(run_cli("generate --scenes 3 --grid 16 --data " + d.string()), 0);
  EXPECT_EQ(run_cli("evaluate --data " + d.string() + " --checkpoint " +
                    (dir.path() / "none.ckpt").string()),
            2);
}
#endif
