// SPDX-License-Identifier: Apache-2.0
#include "chansr/generate.hpp"

#include <algorithm>
#include <cstdio>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::dataset {

void GenerateOptions::validate() const {
  if (scenes < 1) throw InvalidArgument("scenes must be >= 1");
  if (grid < 8) throw InvalidArgument("grid must be >= 8 cells");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw InvalidArgument("split_ratio must lie in (0, 1)");
  }
  for (int s : scales) {
    if (s < 1 || grid % s != 0) {
      throw InvalidArgument("scale " + std::to_string(s) + " must divide grid " +
                            std::to_string(grid));
    }
  }
  scene.validate();
}

std::vector<ChannelMap> GeneratedDataset::select(const std::string& split_tag) const {
  std::vector<ChannelMap> out;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (manifest.samples[i].split == split_tag) out.push_back(maps[i]);
  }
  return out;
}

GeneratedDataset generate_dataset(const GenerateOptions& options) {
  options.validate();
  GeneratedDataset out;
  DatasetManifest& m = out.manifest;
  m.scales = options.scales;
  m.augmentation = options.augmentation;
  m.scene_seed = options.scene_seed;
  m.noise_seed = options.noise_seed;
  m.split_seed = options.split_seed;
  m.split_ratio = options.split_ratio;
  m.cell_size_m = options.scene.cell_size_m;

  for (int i = 0; i < options.scenes; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const auto scene_seed = hash_combine(options.scene_seed, idx);
    const auto noise_seed = hash_combine(options.noise_seed, idx);
    const auto sc = scene::generate_scene(scene_seed, options.grid, options.grid, options.scene);
    ChannelMap map = scene::render_maps(sc, noise_seed, options.propagation);
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04d", i);
    map.meta.scene_id = id;
    map.meta.scene_seed = scene_seed;
    map.meta.noise_seed = noise_seed;
    map.meta.cell_size_m = options.scene.cell_size_m;

    SampleEntry e;
    e.id = id;
    e.file = std::string(id) + ".bin";
    e.scene_id = id;
    e.scene_seed = scene_seed;
    e.noise_seed = noise_seed;
    e.height = map.h();
    e.width = map.w();
    m.samples.push_back(e);
    out.maps.push_back(std::move(map));
  }

  if (options.scenes >= 2) {
    const auto [train, test] = split(m, options.split_ratio, options.split_seed);
    for (auto& e : m.samples) {
      const bool in_train = std::any_of(train.begin(), train.end(),
                                        [&](const SampleEntry& t) { return t.id == e.id; });
      e.split = in_train ? "train" : "test";
    }
  } else {
    m.samples.front().split = "train";
  }
  return out;
}

}  // namespace chansr::dataset
