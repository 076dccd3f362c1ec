// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/dataset.hpp"
#include "chansr/loss.hpp"
#include "chansr/model.hpp"

namespace chansr::eval {

struct TargetStats {
  double mae = 0.0;   // mean |error|, physical units
  double stde = 0.0;  // standard deviation of the signed error
  bool operator==(const TargetStats&) const = default;
};

/// Error statistics over valid cells (both masks 1.0) of one or more maps.
struct MetricsReport {
  std::string model_id;
  int scale = 0;
  std::size_t sample_count = 0;
  std::size_t cell_count = 0;
  /// PL, R_p, DS, azimuth, elevation.
  std::array<TargetStats, model::kNumRegressionTasks> targets{};
  /// Fraction of valid cells whose predicted LOS/NLOS class is correct.
  double accuracy = 0.0;

  const TargetStats& of(model::Task t) const {
    return targets[static_cast<std::size_t>(model::idx(t))];
  }
  bool operator==(const MetricsReport&) const = default;
};

/// Physical-unit prediction of the five regression targets plus a class
/// index (0 LOS, 1 NLOS, 2 in-building) per cell.
struct Prediction {
  std::array<Grid4, model::kNumRegressionTasks> values;
  std::vector<std::uint8_t> classes;
  int h = 0;
  int w = 0;
};

Prediction prediction_from_output(const model::ModelOutput& out,
                                  const dataset::Normalization& norm);
/// Degraded map read as a prediction: interpolated values and the
/// nearest-anchor class code.
Prediction prediction_from_degraded(const dataset::DegradedMap& lr);

/// Pools errors across samples; finish() produces the report.
class MetricsAccumulator {
 public:
  void add(const Prediction& pred, const ChannelMap& hr, const loss::MaskPair& masks);
  /// Throws InvalidArgument when no valid cell was seen.
  MetricsReport finish(std::string model_id, int scale) const;

 private:
  struct Running {
    double abs_sum = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::array<Running, model::kNumRegressionTasks> running_{};
  std::size_t cells_ = 0;
  std::size_t correct_ = 0;
  std::size_t samples_ = 0;
};

MetricsReport compute_metrics(const Prediction& pred, const ChannelMap& hr,
                              const loss::MaskPair& masks);
MetricsReport compute_metrics(const model::ModelOutput& pred,
                              const dataset::Normalization& norm,
                              const ChannelMap& hr, const loss::MaskPair& masks);

/// Metrics of the degraded map itself against the HR map.
MetricsReport bilinear_baseline(const ChannelMap& hr, int s);
MetricsReport bilinear_baseline(const std::vector<ChannelMap>& hr, int s);

/// Runs the model on the degraded, normalized version of every map.
MetricsReport evaluate_model(const model::ModelParams& params,
                             const std::vector<ChannelMap>& hr, int s,
                             const dataset::Normalization& norm,
                             std::string model_id = "model");

}  // namespace chansr::eval
