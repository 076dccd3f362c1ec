// SPDX-License-Identifier: Apache-2.0
#include "chansr/channels.hpp"

#include <cmath>

#include "chansr/error.hpp"
#include "chansr/grid.hpp"

namespace chansr {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

float los_code(LosState s) {
  switch (s) {
    case LosState::kLos: return kLosCodeLos;
    case LosState::kNlos: return kLosCodeNlos;
    case LosState::kInBuilding: return kLosCodeInBuilding;
  }
  return kLosCodeInBuilding;
}

LosState los_state_from_code(float code) {
  if (code == kLosCodeLos) return LosState::kLos;
  if (code == kLosCodeNlos) return LosState::kNlos;
  if (code == kLosCodeInBuilding) return LosState::kInBuilding;
  throw InvalidArgument("invalid LOS code " + std::to_string(code));
}

std::string_view to_string(LosState s) {
  switch (s) {
    case LosState::kLos: return "LOS";
    case LosState::kNlos: return "NLOS";
    case LosState::kInBuilding: return "NaN";
  }
  return "?";
}

const std::array<ValueRange, 5>& characteristic_ranges() {
  // Open ends are represented by the adjacent representable float.
  static const std::array<ValueRange, 5> kRanges = {{
      {-200.0f, std::nextafter(0.0f, -1.0f), kPathLossSentinel},
      {std::nextafter(-30.0f, 0.0f), 0.0f, kPowerRatioSentinel},
      {std::nextafter(0.0f, 1.0f), std::nextafter(500.0f, 0.0f),
       kDelaySpreadSentinel},
      {0.0f, std::nextafter(360.0f, 0.0f), kAzimuthSentinel},
      {0.0f, std::nextafter(180.0f, 0.0f), kElevationSentinel},
  }};
  return kRanges;
}

const ValueRange& range_of(Channel c) {
  const int i = ch(c);
  if (i < ch(Channel::kPathLoss) || i > ch(Channel::kElevationSpread)) {
    throw InvalidArgument("channel has no characteristic range");
  }
  return characteristic_ranges()[static_cast<std::size_t>(i - 1)];
}

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kHeight: return "height";
    case Channel::kPathLoss: return "PL";
    case Channel::kPowerRatio: return "Rp";
    case Channel::kDelaySpread: return "DS";
    case Channel::kAzimuthSpread: return "phi";
    case Channel::kElevationSpread: return "theta";
    case Channel::kLosCode: return "LOS";
  }
  return "?";
}

}  // namespace chansr
