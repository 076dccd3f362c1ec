// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/dataset.hpp"
#include "chansr/scene.hpp"

namespace chansr::dataset {

struct GenerateOptions {
  int scenes = 60;
  int grid = 64;
  std::uint64_t scene_seed = 7;
  std::uint64_t noise_seed = 11;
  std::uint64_t split_seed = 13;
  double split_ratio = 0.7;
  std::vector<int> scales{2, 4, 8};
  bool augmentation = true;
  scene::SceneParams scene;
  scene::PropagationParams propagation;

  /// Throws InvalidArgument for non-positive counts or sizes.
  void validate() const;
};

/// Scenes and maps held in memory, with the manifest that save_dataset
/// would write (split tags already assigned).
struct GeneratedDataset {
  DatasetManifest manifest;
  std::vector<ChannelMap> maps;

  std::vector<ChannelMap> select(const std::string& split_tag) const;
};

/// Scene i uses seeds hash_combine(scene_seed, i) and
/// hash_combine(noise_seed, i), so a dataset is a pure function of the
/// options.
GeneratedDataset generate_dataset(const GenerateOptions& options);

}  // namespace chansr::dataset
