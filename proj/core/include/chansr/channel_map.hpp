// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "chansr/channels.hpp"
#include "chansr/grid.hpp"

namespace chansr {

struct MapMeta {
  std::string scene_id;
  std::uint64_t scene_seed = 0;
  std::uint64_t noise_seed = 0;
  double cell_size_m = 5.0;
  /// Augmentation applied to the source map ("identity" for originals).
  std::string transform = "identity";

  bool operator==(const MapMeta&) const = default;
};

/// Seven-channel characteristic map in physical units, shape (1, 7, H, W).
struct ChannelMap {
  Grid4 data;
  MapMeta meta;

  ChannelMap() = default;
  ChannelMap(int h, int w) : data(1, kNumChannels, h, w) {}

  int h() const { return data.h(); }
  int w() const { return data.w(); }
  float& at(Channel c, int y, int x) { return data(0, ch(c), y, x); }
  float at(Channel c, int y, int x) const { return data(0, ch(c), y, x); }
  LosState los(int y, int x) const {
    return los_state_from_code(at(Channel::kLosCode, y, x));
  }

  bool operator==(const ChannelMap&) const = default;
};

/// Throws InvalidArgument naming the first cell that is neither a sentinel
/// tuple nor inside every normal range.
void validate_channel_map(const ChannelMap& map);

}  // namespace chansr
