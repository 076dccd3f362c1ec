// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "chansr/channel_map.hpp"
#include "chansr/random.hpp"
#include "chansr/scene.hpp"

namespace chansr::fixtures {

inline Grid4 random_grid(Shape4 s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Grid4 g(s);
  for (auto& v : g.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return g;
}

inline Grid4d random_grid_d(Shape4 s, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  Rng rng(seed);
  Grid4d g(s);
  for (auto& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

/// Rendered map of a generated scene.
inline ChannelMap scene_map(std::uint64_t seed, int grid = 32) {
  const auto sc = scene::generate_scene(seed, grid, grid);
  auto m = scene::render_maps(sc, seed + 100);
  m.meta.scene_id = "scene_" + std::to_string(seed);
  return m;
}

/// Map with arbitrary (not physically valid) channel values and a random
/// LOS-code plane; useful for permutation and oracle tests.
inline ChannelMap random_map(int h, int w, std::uint64_t seed, double p_building = 0.2) {
  Rng rng(seed);
  ChannelMap m;
  m.data = Grid4(1, kNumChannels, h, w);
  for (int c = 0; c < kNumChannels - 1; ++c) {
    for (auto& v : m.data.plane(0, c)) v = static_cast<float>(rng.uniform(-50.0, 50.0));
  }
  for (auto& v : m.data.plane(0, kNumChannels - 1)) {
    const double u = rng.uniform();
    v = u < p_building ? kLosCodeInBuilding : (u < 0.6 ? kLosCodeLos : kLosCodeNlos);
  }
  m.meta.scene_id = "rand_" + std::to_string(seed);
  return m;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("chansr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace chansr::fixtures
