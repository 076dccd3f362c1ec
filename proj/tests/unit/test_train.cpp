// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "chansr/checkpoint.hpp"
#include "chansr/error.hpp"
#include "chansr/optim.hpp"
#include "chansr/train.hpp"
#include "test_util.hpp"

using namespace chansr;
using namespace chansr::train;

namespace {

std::vector<ChannelMap> maps(std::uint64_t first, int count, int grid = 16) {
  std::vector<ChannelMap> out;
  for (int i = 0; i < count; ++i) out.push_back(fixtures::scene_map(first + i, grid));
  return out;
}

TrainConfig tiny_config(int pre, int fine, double lr = 1e-3) {
  TrainConfig c;
  c.epochs_pretrain = pre;
  c.epochs_finetune = fine;
  c.learning_rate = lr;
  c.augmentation = false;
  c.eval_every_epoch = false;
  return c;
}

TrainingData tiny_data(const TrainConfig& c, int n_train = 2) {
  return prepare_training_data(maps(1, n_train), maps(50, 1), c,
                               dataset::Normalization::defaults());
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<float> p{0.0f, 2.0f}, g{1.0f, -4.0f};
  const std::vector<std::size_t> sizes{2};
  auto st = AdamState::zeros(sizes);
  adam_step({std::span<float>(p)}, {std::span<const float>(g)}, st, 0.1);
  // Bias correction makes the first step lr * sign(g).
  EXPECT_NEAR(p[0], -0.1f, 1e-6);
  EXPECT_NEAR(p[1], 2.1f, 1e-6);
  EXPECT_EQ(st.step, 1u);
  EXPECT_NEAR(st.m[0][0], 0.1f, 1e-7);
  EXPECT_NEAR(st.v[0][0], 0.001f, 1e-9);
}

TEST(Adam, SecondStepMatchesHandComputation) {
  std::vector<float> p{0.0f}, g{1.0f};
  const std::vector<std::size_t> sizes{1};
  auto st = AdamState::zeros(sizes);
  adam_step({std::span<float>(p)}, {std::span<const float>(g)}, st, 0.1);
  g[0] = 0.5f;
  adam_step({std::span<float>(p)}, {std::span<const float>(g)}, st, 0.1);
  const double m = 0.9 * 0.1 + 0.1 * 0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], -0.1 - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<float> p{1.5f, -3.0f}, g{0.0f, 0.0f};
  const std::vector<std::size_t> sizes{2};
  auto st = AdamState::zeros(sizes);
  for (int i = 0; i < 5; ++i)
    adam_step({std::span<float>(p)}, {std::span<const float>(g)}, st, 0.1);
  EXPECT_EQ(p[0], 1.5f);
  EXPECT_EQ(p[1], -3.0f);
}

TEST(Adam, NonFiniteGradientNamesTensorAndUpdatesNothing) {
  std::vector<float> a{1.0f}, b{2.0f}, ga{1.0f},
      gb{std::numeric_limits<float>::quiet_NaN()};
  const std::vector<std::size_t> sizes{1, 1};
  auto st = AdamState::zeros(sizes);
  const std::vector<std::string> names{"block0.conv1.weight", "head.PL.conv2.bias"};
  try {
    adam_step({std::span<float>(a), std::span<float>(b)},
              {std::span<const float>(ga), std::span<const float>(gb)}, st, 0.1, {}, names);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("head.PL.conv2.bias"), std::string::npos);
  }
  EXPECT_EQ(a[0], 1.0f);
  EXPECT_EQ(st.step, 0u);
}

TEST(Adam, SelectedTensorsOnly) {
  std::vector<float> a{1.0f}, b{1.0f}, g{1.0f};
  const std::vector<std::size_t> sizes{1, 1};
  auto st = AdamState::zeros(sizes);
  const std::vector<std::size_t> sel{1};
  adam_step({std::span<float>(a), std::span<float>(b)},
            {std::span<const float>(g), std::span<const float>(g)}, st, 0.1, sel);
  EXPECT_EQ(a[0], 1.0f);
  EXPECT_NEAR(b[0], 0.9f, 1e-6);
}

TEST(Adam, ShapeAndLrErrors) {
  std::vector<float> a{1.0f}, g{1.0f, 2.0f};
  const std::vector<std::size_t> sizes{1};
  auto st = AdamState::zeros(sizes);
  EXPECT_THROW(adam_step({std::span<float>(a)}, {std::span<const float>(g)}, st, 0.1),
               ShapeError);
  std::vector<float> g1{1.0f};
  EXPECT_THROW(adam_step({std::span<float>(a)}, {std::span<const float>(g1)}, st, -1.0),
               InvalidArgument);
}

TEST(TrainConfigValidate, RejectsBadValues) {
  auto ok = tiny_config(1, 1);
  EXPECT_NO_THROW(ok.validate());
  auto c = ok;
  c.batch_size = 4;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ok;
  c.epochs_pretrain = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ok;
  c.learning_rate = std::nan("");
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = ok;
  c.tasks.fill(false);
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(PrepareData, AugmentationMultipliesBySix) {
  auto c = tiny_config(1, 1);
  EXPECT_EQ(tiny_data(c, 3).train.size(), 3u);
  c.augmentation = true;
  const auto d = tiny_data(c, 3);
  EXPECT_EQ(d.train.size(), 18u);
  EXPECT_EQ(d.test.size(), 1u);
}

TEST(PrepareData, SampleWithoutValidCellsThrows) {
  const auto m = fixtures::random_map(8, 8, 1, 1.0);
  EXPECT_THROW(prepare_sample(m, 2, dataset::Normalization::defaults()), InvalidArgument);
}

TEST(Pretrain, OneEpochOneSampleIsOneStep) {
  const auto c = tiny_config(1, 0);
  const auto d = tiny_data(c, 1);
  const auto init = model::build_model<float>(model::ArchConfig{}, c.init_seed);
  const auto r = pretrain_stage(init, d, c);
  ASSERT_EQ(r.log.records.size(), 1u);
  EXPECT_EQ(r.log.records[0].steps, 1u);
  EXPECT_EQ(r.checkpoint.optimizer.step, 1u);
  EXPECT_EQ(r.checkpoint.epochs_done, 1u);
  EXPECT_EQ(r.checkpoint.stage, Stage::kPretrain);
}

TEST(Pretrain, ZeroLearningRateLeavesParameters) {
  const auto c = tiny_config(2, 0, 0.0);
  const auto d = tiny_data(c);
  const auto init = model::build_model<float>(model::ArchConfig{}, 4);
  EXPECT_EQ(pretrain_stage(init, d, c).checkpoint.params, init);
}

TEST(Pretrain, ObjectiveDecreasesAndSigmaIsLogged) {
  const auto c = tiny_config(15, 0, 3e-3);
  const auto d = tiny_data(c);
  const auto r = pretrain_stage(model::build_model<float>(model::ArchConfig{}, 1), d, c);
  ASSERT_EQ(r.log.records.size(), 15u);
  EXPECT_LT(r.log.records.back().objective, r.log.records.front().objective);
  for (int t = 0; t < model::kNumTasks; ++t) {
    EXPECT_NEAR(r.log.records.back().sigma[static_cast<std::size_t>(t)],
                std::exp(r.checkpoint.params.log_sigma[static_cast<std::size_t>(t)]), 1e-6);
  }
}

TEST(Pretrain, EpochCallbackAndTestMetrics) {
  auto c = tiny_config(2, 0);
  c.eval_every_epoch = true;
  const auto d = tiny_data(c);
  int calls = 0;
  const auto r = pretrain_stage(model::build_model<float>(model::ArchConfig{}, 1), d, c,
                                [&](const EpochRecord& rec) {
                                  ++calls;
                                  EXPECT_TRUE(rec.test.has_value());
                                });
  EXPECT_EQ(calls, 2);
}

TEST(TwoStage, FinetuneKeepsBackboneBitIdenticalAndMovesHeads) {
  const auto c = tiny_config(2, 3);
  const auto d = tiny_data(c);
  const auto r = train_two_stage(model::ArchConfig{}, d, c);
  EXPECT_EQ(backbone_digest(r.pretrained.params), backbone_digest(r.finetuned.params));
  for (std::size_t b = 0; b < r.finetuned.params.blocks.size(); ++b) {
    EXPECT_EQ(r.pretrained.params.blocks[b], r.finetuned.params.blocks[b]);
  }
  for (int t = 0; t < model::kNumTasks; ++t) {
    EXPECT_NE(r.pretrained.params.heads[static_cast<std::size_t>(t)],
              r.finetuned.params.heads[static_cast<std::size_t>(t)]);
  }
  // Moments restart at the fine-tune stage.
  EXPECT_EQ(r.finetuned.optimizer.step, 3u * d.train.size());
  EXPECT_EQ(r.finetuned.stage, Stage::kFinetune);
  EXPECT_EQ(r.log.records.size(), 5u);
}

TEST(TwoStage, InactiveHeadsStayAtPretrainedValues) {
  auto c = tiny_config(1, 2);
  c.tasks = kPathLossOnly;
  const auto d = tiny_data(c);
  const auto r = train_two_stage(model::ArchConfig{}, d, c);
  EXPECT_NE(r.pretrained.params.heads[0], r.finetuned.params.heads[0]);
  for (int t = 1; t < model::kNumTasks; ++t) {
    EXPECT_EQ(r.pretrained.params.heads[static_cast<std::size_t>(t)],
              r.finetuned.params.heads[static_cast<std::size_t>(t)]);
  }
}

TEST(TwoStage, SameSeedsReproduce) {
  auto c = tiny_config(2, 2);
  c.augmentation = true;
  const auto d = tiny_data(c, 1);
  const auto a = train_two_stage(model::ArchConfig{}, d, c);
  const auto b = train_two_stage(model::ArchConfig{}, d, c);
  EXPECT_EQ(a.finetuned, b.finetuned);
  c.shuffle_seed = 99;
  EXPECT_NE(train_two_stage(model::ArchConfig{}, d, c).finetuned.params, a.finetuned.params);
}

TEST(TwoStage, FinetuneRejectsOtherScale) {
  const auto c = tiny_config(1, 1);
  const auto d = tiny_data(c);
  const auto r = pretrain_stage(model::build_model<float>(model::ArchConfig{}, 1), d, c);
  auto c4 = c;
  c4.scale = 4;
  const auto d4 = tiny_data(c4);
  EXPECT_THROW(finetune_stage(r.checkpoint, d4, c4), ConfigMismatchError);
}

TEST(Checkpoint, RoundTripAndErrors) {
  fixtures::TempDir dir;
  const auto c = tiny_config(1, 0);
  const auto d = tiny_data(c, 1);
  const auto ck = pretrain_stage(model::build_model<float>(model::ArchConfig{}, 1), d, c).checkpoint;
  const auto path = dir.path() / "a.ckpt";
  save_checkpoint(path, ck);
  EXPECT_EQ(load_checkpoint(path), ck);
  EXPECT_EQ(load_checkpoint(path, ck.config_hash), ck);
  EXPECT_THROW(load_checkpoint(path, ck.config_hash + 1), ConfigMismatchError);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing.ckpt"), IoError);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::copy_file(path, dir.path() / "t.ckpt");
  std::filesystem::resize_file(dir.path() / "t.ckpt", size - 5);
  EXPECT_THROW(load_checkpoint(dir.path() / "t.ckpt"), FormatError);

  std::filesystem::copy_file(path, dir.path() / "m.ckpt");
  {
    std::fstream f(dir.path() / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint(dir.path() / "m.ckpt"), FormatError);
}

TEST(Checkpoint, HashCoversArchScaleAndNormalization) {
  const auto norm = dataset::Normalization::defaults();
  const model::ArchConfig arch;
  const auto h = config_hash(arch, 2, norm);
  EXPECT_EQ(h, config_hash(arch, 2, norm));
  EXPECT_NE(h, config_hash(arch, 4, norm));
  EXPECT_NE(h, config_hash(model::flat_config(), 2, norm));
  auto n2 = norm;
  n2.hi[0] = 151.0f;
  EXPECT_NE(h, config_hash(arch, 2, n2));
}

TEST(Checkpoint, StageNames) {
  for (Stage s : {Stage::kInit, Stage::kPretrain, Stage::kFinetune})
    EXPECT_EQ(stage_from_string(to_string(s)), s);
  EXPECT_THROW(stage_from_string("bogus"), InvalidArgument);
}

TEST(ModelGradCheck, TenSeeds) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    EXPECT_LT(model_grad_check(seed, model::ArchConfig{}, 6, 6).max_rel_error, 1e-3);
  }
}
