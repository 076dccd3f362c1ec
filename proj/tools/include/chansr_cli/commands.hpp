// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "chansr_cli/run_config.hpp"

namespace chansr::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
  kExitThreshold = 3,
};

/// Writes the dataset and manifest to `data_dir`; prints counts and
/// building-coverage statistics.
int cmd_generate(const RunConfig& config, std::ostream& out);

/// Trains every scale in `train_scales` into <run_dir>/s<scale>/:
/// pretrain.ckpt, finetune.ckpt, train_log.jsonl, metrics.jsonl.
int cmd_train(const RunConfig& config, std::ostream& out);

/// Model and bilinear rows for every eval scale. Returns kExitThreshold
/// when a configured gate fails.
int cmd_evaluate(const RunConfig& config, std::ostream& out);

int cmd_ablate(const RunConfig& config, std::ostream& out);

/// Persists the resolved config as `resolved_config.json` in `dir`.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

/// Checkpoint path for `scale` following the eval.checkpoint rules.
std::filesystem::path checkpoint_for_scale(const RunConfig& config, int scale);

}  // namespace chansr::cli
