// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/checkpoint.hpp"
#include "chansr/dataset.hpp"
#include "chansr/grad_check.hpp"
#include "chansr/loss.hpp"
#include "chansr/metrics.hpp"
#include "chansr/model.hpp"
#include "chansr/optim.hpp"

namespace chansr::train {

using TaskMask = std::array<bool, model::kNumTasks>;
inline constexpr TaskMask kAllTasksMask{true, true, true, true, true, true};
inline constexpr TaskMask kPathLossOnly{true, false, false, false, false, false};

struct TrainConfig {
  int epochs_pretrain = 100;
  int epochs_finetune = 100;
  double learning_rate = 1e-5;
  int batch_size = 1;
  int scale = 2;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  bool augmentation = true;
  /// Tasks whose heads and losses take part in training.
  TaskMask tasks = kAllTasksMask;
  /// Evaluate the test split after every epoch (needed for the curves).
  bool eval_every_epoch = true;

  /// Throws InvalidArgument: negative epochs, negative or non-finite lr,
  /// batch size other than 1, scale < 1, no active task.
  void validate() const;
};

/// One HR map turned into network-ready tensors at a given scale.
struct PreparedSample {
  std::string id;
  Grid4 input;  // normalized degraded map, 1x7xHxW
  std::array<Grid4, model::kNumRegressionTasks> targets;  // normalized, 1x1xHxW
  Grid4 onehot;  // 1x3xHxW
  loss::MaskPair masks;
  std::size_t valid = 0;
};

PreparedSample prepare_sample(const ChannelMap& hr, int s,
                              const dataset::Normalization& norm);

struct TrainingData {
  int scale = 0;
  dataset::Normalization norm;
  std::vector<PreparedSample> train;
  std::vector<ChannelMap> test;
};

/// Degrades and normalizes the training maps, expanding each into its six
/// augmented variants when `config.augmentation` is set. Test maps are
/// kept unaugmented.
TrainingData prepare_training_data(const std::vector<ChannelMap>& train_maps,
                                   const std::vector<ChannelMap>& test_maps,
                                   const TrainConfig& config,
                                   const dataset::Normalization& norm);

/// Unweighted per-task losses of one output against one sample.
std::array<double, model::kNumTasks> task_losses(const model::ModelOutput& out,
                                                 const PreparedSample& sample);

struct EpochRecord {
  Stage stage = Stage::kPretrain;
  int epoch = 0;  // 1-based within the stage
  std::uint64_t steps = 0;  // optimizer steps taken so far in the stage
  /// Mean per-task training loss over the epoch (0 for inactive tasks).
  std::array<double, model::kNumTasks> train_loss{};
  /// Mean optimized objective: the uncertainty-weighted loss during
  /// pre-training, the sum of active task losses during fine-tuning.
  double objective = 0.0;
  /// sigma_m = exp(s_m) at the end of the epoch.
  std::array<double, model::kNumTasks> sigma{};
  std::optional<eval::MetricsReport> test;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct StageResult {
  Checkpoint checkpoint;
  TrainLog log;
};

/// Uncertainty-weighted multi-task training of every parameter.
StageResult pretrain_stage(const model::ModelParams& init, const TrainingData& data,
                           const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Head-only training from a pre-trained checkpoint. Each head follows its
/// own single-task loss; the backbone is never written. Adam moments are
/// reset at the start of the stage. Throws ConfigMismatchError when the
/// checkpoint was built for another architecture, scale or normalization.
StageResult finetune_stage(const Checkpoint& pretrained, const TrainingData& data,
                           const TrainConfig& config, const EpochCallback& on_epoch = {});

struct TwoStageResult {
  Checkpoint pretrained;
  Checkpoint finetuned;
  TrainLog log;
};

TwoStageResult train_two_stage(const model::ArchConfig& arch, const TrainingData& data,
                               const TrainConfig& config,
                               const EpochCallback& on_epoch = {});

/// FNV-1a digest of the backbone tensors' bytes.
std::uint64_t backbone_digest(const model::ModelParams& params);

/// End-to-end finite-difference check of model + uncertainty-weighted loss
/// in double precision over every scalar parameter, on a random 1x7xHxW
/// input with in-building cells and anchors at scale 2.
diff::GradCheckResult model_grad_check(std::uint64_t seed,
                                       const model::ArchConfig& arch = {}, int h = 8,
                                       int w = 8, double eps = 1e-6);

}  // namespace chansr::train
