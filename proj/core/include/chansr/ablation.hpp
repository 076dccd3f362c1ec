// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/dataset.hpp"
#include "chansr/metrics.hpp"
#include "chansr/model.hpp"
#include "chansr/train.hpp"

namespace chansr::eval {

enum class Variant { kStl, kMtl, kMtlRes, kMtlResDa };

std::string_view to_string(Variant v);
/// Accepts "STL", "MTL", "MTL+RES", "MTL+RES+DA" (case-insensitive).
Variant variant_from_string(std::string_view s);

struct VariantSetup {
  model::ArchConfig arch;
  train::TrainConfig train;
};

/// STL: flat blocks, PL head and loss only. MTL: flat blocks, all tasks.
/// MTL+RES: the base schedule with residual adds. MTL+RES+DA: as MTL+RES
/// plus augmentation. Epochs, lr and seeds come from `base`.
VariantSetup setup_variant(Variant v, const model::ArchConfig& base_arch,
                           const train::TrainConfig& base);

struct AblationRun {
  Variant variant = Variant::kMtl;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct AblationRow {
  Variant variant = Variant::kMtl;
  std::vector<AblationRun> runs;
  double median_mae = 0.0;   // PL, dB
  double median_stde = 0.0;  // PL, dB
  /// (MTL - variant) / MTL; absent when MTL is not part of the grid.
  std::optional<double> gain_mae;
  std::optional<double> gain_stde;
};

struct AblationTable {
  int scale = 0;
  std::vector<AblationRow> rows;
};

struct AblationOptions {
  /// Worker threads; 0 means the CHANSR_THREADS cap (or hardware
  /// concurrency when unset).
  unsigned threads = 0;
};

double median(std::vector<double> values);

/// Trains every (variant, seed) pair under the same budget and evaluates
/// PL on the test maps. Seeds set both init and shuffle seeds.
AblationTable run_ablation(const std::vector<ChannelMap>& train_maps,
                           const std::vector<ChannelMap>& test_maps,
                           const std::vector<Variant>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const model::ArchConfig& base_arch,
                           const train::TrainConfig& base,
                           const dataset::Normalization& norm,
                           const AblationOptions& options = {});

/// Thread cap from CHANSR_THREADS, falling back to hardware concurrency.
unsigned thread_cap();

}  // namespace chansr::eval
