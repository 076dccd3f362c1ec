// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace chansr {

/// Channel layout of a channel-characteristic map.
enum class Channel : int {
  kHeight = 0,  // building height, m (0 outside buildings)
  kPathLoss,    // dB
  kPowerRatio,  // multipath power ratio, dB
  kDelaySpread, // ns
  kAzimuthSpread,    // deg
  kElevationSpread,  // deg
  kLosCode,     // -1 LOS, 0 NLOS, 1 in-building
};
inline constexpr int kNumChannels = 7;

inline constexpr int ch(Channel c) { return static_cast<int>(c); }

/// Propagation condition of a receiver cell.
enum class LosState : std::uint8_t { kLos = 0, kNlos = 1, kInBuilding = 2 };

inline constexpr float kLosCodeLos = -1.0f;
inline constexpr float kLosCodeNlos = 0.0f;
inline constexpr float kLosCodeInBuilding = 1.0f;

float los_code(LosState s);
LosState los_state_from_code(float code);
std::string_view to_string(LosState s);

/// Normal range of one characteristic plus the sentinel stored for
/// in-building receivers. Bounds are float-exact: `lo`/`hi` are the smallest
/// and largest admissible stored values.
struct ValueRange {
  float lo;
  float hi;
  float sentinel;

  bool contains(float v) const { return v >= lo && v <= hi; }
  /// Values beyond the admissible interval snap to the nearer bound.
  float clamp(float v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

/// Ranges for PL, R_p, DS, azimuth and elevation spread, indexed by
/// `ch(Channel) - 1`.
const std::array<ValueRange, 5>& characteristic_ranges();
const ValueRange& range_of(Channel c);

inline constexpr float kPathLossSentinel = 200.0f;
inline constexpr float kPowerRatioSentinel = 100.0f;
inline constexpr float kDelaySpreadSentinel = -100.0f;
inline constexpr float kAzimuthSentinel = -360.0f;
inline constexpr float kElevationSentinel = -180.0f;

inline constexpr float kMaxBuildingHeightM = 150.0f;

std::string_view channel_name(Channel c);

}  // namespace chansr
