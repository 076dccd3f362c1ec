// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "chansr/dataset.hpp"
#include "chansr/model.hpp"
#include "chansr/optim.hpp"

namespace chansr::train {

enum class Stage : std::uint32_t { kInit = 0, kPretrain = 1, kFinetune = 2 };
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

/// Fingerprint of everything a checkpoint's numbers depend on besides
/// the data: architecture, scale factor and normalization bounds.
std::uint64_t config_hash(const model::ArchConfig& arch, int scale,
                          const dataset::Normalization& norm);

struct Checkpoint {
  model::ModelParams params;
  AdamState optimizer;
  std::uint64_t config_hash = 0;
  int scale = 0;
  Stage stage = Stage::kInit;
  std::uint32_t epochs_done = 0;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Binary layout, little-endian:
///   "CSRM" | u16 version | u16 reserved
///   u32 n_blocks, in_channels, block_mid, head_mid, residual, head_out[6]
///   u64 config_hash | u32 scale | u32 stage | u32 epochs_done
///   u64 P | f32 params[P] in tensors() order
///   u64 adam_step | f64 beta1, beta2, eps | f32 m[P] | f32 v[P]
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws IoError for a missing file, FormatError for a malformed one and
/// ConfigMismatchError when `expected_hash` is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace chansr::train
