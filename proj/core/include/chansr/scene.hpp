// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/channels.hpp"

namespace chansr::scene {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

/// Axis-aligned footprint in grid cells, [row, row+rows) x [col, col+cols).
struct Building {
  int row = 0;
  int col = 0;
  int rows = 1;
  int cols = 1;
  float height_m = 10.0f;

  bool contains(int r, int c) const {
    return r >= row && r < row + rows && c >= col && c < col + cols;
  }
  bool operator==(const Building&) const = default;
};

struct Transmitter {
  int row = 0;
  int col = 0;
  float height_m = 30.0f;
  /// Index of the building the antenna is mounted on, or -1 for a free mast.
  int building = -1;
  bool operator==(const Transmitter&) const = default;
};

/// Knobs for the randomized urban layout.
struct SceneParams {
  double cell_size_m = 5.0;
  double min_coverage = 0.20;
  double max_coverage = 0.40;
  int min_side = 2;
  int max_side = 8;
  float min_height_m = 6.0f;
  float max_height_m = 40.0f;
  float tx_mast_min_m = 2.0f;
  float tx_mast_max_m = 6.0f;
  int max_attempts = 64;

  void validate() const;
};

class Scene {
 public:
  Scene() = default;
  Scene(int grid_h, int grid_w, double cell_size_m,
        std::vector<Building> buildings, Transmitter tx);

  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }
  double cell_size_m() const { return cell_size_m_; }
  const std::vector<Building>& buildings() const { return buildings_; }
  const Transmitter& tx() const { return tx_; }

  bool inside(int r, int c) const {
    return r >= 0 && r < grid_h_ && c >= 0 && c < grid_w_;
  }
  /// Tallest footprint covering the cell, 0 for open ground.
  float height_at(int r, int c) const { return heights_[idx(r, c)]; }
  bool in_building(int r, int c) const { return heights_[idx(r, c)] > 0.0f; }
  /// Height that can block a sight line; the transmitter's own building
  /// never occludes.
  float occluder_at(int r, int c) const { return occluders_[idx(r, c)]; }
  /// Index of the tallest occluding building at the cell, or -1.
  int occluder_id(int r, int c) const { return occluder_ids_[idx(r, c)]; }
  double coverage() const;

  bool operator==(const Scene& o) const {
    return grid_h_ == o.grid_h_ && grid_w_ == o.grid_w_ &&
           cell_size_m_ == o.cell_size_m_ && buildings_ == o.buildings_ &&
           tx_ == o.tx_;
  }

 private:
  std::size_t idx(int r, int c) const {
    return static_cast<std::size_t>(r) * grid_w_ + c;
  }

  int grid_h_ = 0;
  int grid_w_ = 0;
  double cell_size_m_ = 5.0;
  std::vector<Building> buildings_;
  Transmitter tx_;
  std::vector<float> heights_;
  std::vector<float> occluders_;
  std::vector<int> occluder_ids_;
};

/// Checks the generated-scene invariants: footprints inside the grid,
/// heights in (0, 150] m, transmitter 30-50 m high on a top-decile building,
/// building coverage in [10 %, 60 %]. Throws InvalidArgument on violation.
void validate_scene(const Scene& scene);

/// Deterministic randomized scene. Throws InfeasibleError when no layout
/// satisfying the invariants is found within `params.max_attempts`.
Scene generate_scene(std::uint64_t seed, int grid_h, int grid_w,
                     const SceneParams& params = {});

inline constexpr float kRxHeightM = 2.0f;

struct SightLine {
  LosState state = LosState::kLos;
  /// Distinct buildings whose prism the segment enters below its roof.
  int blockers = 0;
};

/// Exact segment-vs-prism occlusion walk from the transmitter to a receiver
/// 2 m above the centre of `rx`.
SightLine trace_sight_line(const Scene& scene, Cell rx);

LosState line_of_sight(const Scene& scene, Cell rx);

/// Constants of the synthetic propagation model.
struct PropagationParams {
  double frequency_ghz = 3.55;
  double exponent_los = 2.2;
  double exponent_nlos = 3.3;
  double diffraction_db = 6.0;
  int max_diffraction_blockers = 4;
  double shadowing_sigma_db = 3.0;
  double shadowing_corr_cells = 8.0;
  double jitter_sigma_db = 0.5;
  /// Direct-to-multipath power ratio (dB) at 10 m in LOS; falls off with
  /// distance at `k_factor_slope_db` per decade.
  double k_factor_10m_db = 14.0;
  double k_factor_slope_db = 10.0;
  double spread_sigma = 0.15;

  bool operator==(const PropagationParams&) const = default;
};

struct ChannelSample {
  float pl_db = kPathLossSentinel;
  float rp_db = kPowerRatioSentinel;
  float ds_ns = kDelaySpreadSentinel;
  float phi_deg = kAzimuthSentinel;
  float theta_deg = kElevationSentinel;
  LosState los = LosState::kInBuilding;

  bool operator==(const ChannelSample&) const = default;
};

ChannelSample in_building_sample();

/// Multipath power ratio (total - direct) / total in dB, clamped into the
/// normal range. `p_total` must be positive.
float multipath_power_ratio_db(double p_direct, double p_total);

ChannelSample trace_channel(const Scene& scene, Cell rx,
                            std::uint64_t noise_seed,
                            const PropagationParams& prop = {});

/// Populates all seven channels cell by cell via trace_channel.
ChannelMap render_maps(const Scene& scene, std::uint64_t noise_seed,
                       const PropagationParams& prop = {});

/// Unit-variance spatially correlated Gaussian field, evaluated pointwise.
double correlated_field(std::uint64_t seed, double row, double col,
                        double corr_cells);

}  // namespace chansr::scene
