// SPDX-License-Identifier: Apache-2.0
#include "chansr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr {

void validate_channel_map(const ChannelMap& map) {
  if (map.data.n() != 1 || map.data.c() != kNumChannels) {
    throw ShapeError("channel map must be (1,7,H,W), got " +
                     map.data.shape().str());
  }
  for (int y = 0; y < map.h(); ++y) {
    for (int x = 0; x < map.w(); ++x) {
      const auto where = " at (" + std::to_string(y) + "," +
                         std::to_string(x) + ")";
      const float code = map.at(Channel::kLosCode, y, x);
      const float height = map.at(Channel::kHeight, y, x);
      if (!(height >= 0.0f && height <= kMaxBuildingHeightM)) {
        throw InvalidArgument("building height out of range" + where);
      }
      if (code == kLosCodeInBuilding) {
        for (int c = ch(Channel::kPathLoss); c <= ch(Channel::kElevationSpread);
             ++c) {
          if (map.data(0, c, y, x) != characteristic_ranges()[c - 1].sentinel) {
            throw InvalidArgument(std::string(channel_name(Channel{c})) +
                                  " is not its sentinel" + where);
          }
        }
      } else if (code == kLosCodeLos || code == kLosCodeNlos) {
        for (int c = ch(Channel::kPathLoss); c <= ch(Channel::kElevationSpread);
             ++c) {
          if (!characteristic_ranges()[c - 1].contains(map.data(0, c, y, x))) {
            throw InvalidArgument(std::string(channel_name(Channel{c})) +
                                  " outside normal range" + where);
          }
        }
      } else {
        throw InvalidArgument("invalid LOS code" + where);
      }
    }
  }
}

}  // namespace chansr

namespace chansr::scene {

void SceneParams::validate() const {
  if (!(cell_size_m > 0.0)) throw InvalidArgument("cell_size_m must be > 0");
  if (!(min_coverage >= 0.10 && max_coverage <= 0.60 &&
        min_coverage <= max_coverage)) {
    throw InvalidArgument("coverage bounds must satisfy 0.1 <= min <= max <= 0.6");
  }
  if (min_side < 1 || max_side < min_side) {
    throw InvalidArgument("building side bounds must satisfy 1 <= min <= max");
  }
  if (!(min_height_m > 0.0f && max_height_m <= kMaxBuildingHeightM &&
        min_height_m <= max_height_m)) {
    throw InvalidArgument("building heights must lie in (0, 150] m");
  }
  if (!(tx_mast_min_m > 0.0f && tx_mast_max_m >= tx_mast_min_m)) {
    throw InvalidArgument("mast height bounds invalid");
  }
  if (max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
}

Scene::Scene(int grid_h, int grid_w, double cell_size_m,
             std::vector<Building> buildings, Transmitter tx)
    : grid_h_(grid_h),
      grid_w_(grid_w),
      cell_size_m_(cell_size_m),
      buildings_(std::move(buildings)),
      tx_(tx) {
  if (grid_h <= 0 || grid_w <= 0) throw InvalidArgument("empty scene grid");
  if (!inside(tx_.row, tx_.col)) {
    throw InvalidArgument("transmitter outside grid");
  }
  const auto cells = static_cast<std::size_t>(grid_h) * grid_w;
  heights_.assign(cells, 0.0f);
  occluders_.assign(cells, 0.0f);
  occluder_ids_.assign(cells, -1);
  for (std::size_t b = 0; b < buildings_.size(); ++b) {
    const Building& bd = buildings_[b];
    if (bd.rows < 1 || bd.cols < 1 || !inside(bd.row, bd.col) ||
        !inside(bd.row + bd.rows - 1, bd.col + bd.cols - 1)) {
      throw InvalidArgument("building " + std::to_string(b) +
                            " footprint leaves the grid");
    }
    const bool is_tx_building = static_cast<int>(b) == tx_.building;
    for (int r = bd.row; r < bd.row + bd.rows; ++r) {
      for (int c = bd.col; c < bd.col + bd.cols; ++c) {
        auto& h = heights_[idx(r, c)];
        h = std::max(h, bd.height_m);
        if (!is_tx_building && bd.height_m > occluders_[idx(r, c)]) {
          occluders_[idx(r, c)] = bd.height_m;
          occluder_ids_[idx(r, c)] = static_cast<int>(b);
        }
      }
    }
  }
}

double Scene::coverage() const {
  const auto covered = std::count_if(heights_.begin(), heights_.end(),
                                     [](float h) { return h > 0.0f; });
  return static_cast<double>(covered) / static_cast<double>(heights_.size());
}

namespace {

// Height at the 90th percentile (nearest rank) of building heights.
float top_decile_threshold(const std::vector<Building>& buildings) {
  std::vector<float> hs;
  hs.reserve(buildings.size());
  for (const auto& b : buildings) hs.push_back(b.height_m);
  std::sort(hs.begin(), hs.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.9 * static_cast<double>(hs.size())));
  return hs[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace

void validate_scene(const Scene& scene) {
  if (scene.buildings().empty()) throw InvalidArgument("scene has no buildings");
  for (const auto& b : scene.buildings()) {
    if (!(b.height_m > 0.0f && b.height_m <= kMaxBuildingHeightM)) {
      throw InvalidArgument("building height outside (0, 150] m");
    }
  }
  const auto& tx = scene.tx();
  if (!(tx.height_m >= 30.0f && tx.height_m <= 50.0f)) {
    throw InvalidArgument("transmitter height outside [30, 50] m");
  }
  if (tx.building < 0 ||
      tx.building >= static_cast<int>(scene.buildings().size())) {
    throw InvalidArgument("transmitter is not mounted on a building");
  }
  const Building& host = scene.buildings()[static_cast<std::size_t>(tx.building)];
  if (!host.contains(tx.row, tx.col)) {
    throw InvalidArgument("transmitter cell outside its host building");
  }
  if (host.height_m < top_decile_threshold(scene.buildings())) {
    throw InvalidArgument("transmitter building not in the top height decile");
  }
  if (tx.height_m <= host.height_m) {
    throw InvalidArgument("transmitter below its host roof");
  }
  const double cov = scene.coverage();
  if (cov < 0.10 || cov > 0.60) {
    throw InvalidArgument("building coverage " + std::to_string(cov) +
                          " outside [0.1, 0.6]");
  }
}

Scene generate_scene(std::uint64_t seed, int grid_h, int grid_w,
                     const SceneParams& params) {
  if (grid_h < 16 || grid_w < 16) {
    throw InvalidArgument("scene grid must be at least 16x16");
  }
  params.validate();
  const double cells = static_cast<double>(grid_h) * grid_w;

  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(attempt)));
    const double target = rng.uniform(params.min_coverage, params.max_coverage);

    // Host building for the antenna, close to the centre.
    const int host_side = std::clamp(params.min_side, 2, 4);
    const int jitter_r = std::max(1, grid_h / 10);
    const int jitter_c = std::max(1, grid_w / 10);
    Building host;
    host.rows = host_side;
    host.cols = host_side;
    host.row = std::clamp(grid_h / 2 - host_side / 2 +
                              rng.uniform_int(-jitter_r, jitter_r),
                          0, grid_h - host_side);
    host.col = std::clamp(grid_w / 2 - host_side / 2 +
                              rng.uniform_int(-jitter_c, jitter_c),
                          0, grid_w - host_side);

    std::vector<Building> buildings{host};
    std::vector<char> covered(static_cast<std::size_t>(cells), 0);
    auto mark = [&](const Building& b) {
      for (int r = b.row; r < b.row + b.rows; ++r)
        for (int c = b.col; c < b.col + b.cols; ++c)
          covered[static_cast<std::size_t>(r) * grid_w + c] = 1;
    };
    mark(host);
    double n_covered = host.rows * host.cols;

    // Keep a one-cell street ring around the host so the antenna stays free.
    auto touches_host = [&](const Building& b) {
      return b.row <= host.row + host.rows && b.row + b.rows >= host.row &&
             b.col <= host.col + host.cols && b.col + b.cols >= host.col;
    };

    const int max_tries = 40 * static_cast<int>(cells);
    for (int tries = 0; tries < max_tries && n_covered / cells < target;
         ++tries) {
      Building b;
      b.rows = rng.uniform_int(params.min_side, params.max_side);
      b.cols = rng.uniform_int(params.min_side, params.max_side);
      if (b.rows > grid_h || b.cols > grid_w) continue;
      b.row = rng.uniform_int(0, grid_h - b.rows);
      b.col = rng.uniform_int(0, grid_w - b.cols);
      b.height_m = static_cast<float>(
          rng.uniform(params.min_height_m, params.max_height_m));
      if (touches_host(b)) continue;
      buildings.push_back(b);
      for (int r = b.row; r < b.row + b.rows; ++r) {
        for (int c = b.col; c < b.col + b.cols; ++c) {
          auto& cv = covered[static_cast<std::size_t>(r) * grid_w + c];
          if (!cv) {
            cv = 1;
            n_covered += 1.0;
          }
        }
      }
    }
    if (buildings.size() < 2) continue;

    float tallest = 0.0f;
    for (std::size_t i = 1; i < buildings.size(); ++i) {
      tallest = std::max(tallest, buildings[i].height_m);
    }
    buildings[0].height_m = tallest;
    const float mast = static_cast<float>(
        rng.uniform(params.tx_mast_min_m, params.tx_mast_max_m));
    Transmitter tx;
    tx.row = host.row + host.rows / 2;
    tx.col = host.col + host.cols / 2;
    tx.building = 0;
    tx.height_m = std::clamp(tallest + mast, 30.0f, 50.0f);

    Scene scene(grid_h, grid_w, params.cell_size_m, std::move(buildings), tx);
    try {
      validate_scene(scene);
    } catch (const InvalidArgument&) {
      continue;
    }
    return scene;
  }
  throw InfeasibleError("no valid scene after " +
                        std::to_string(params.max_attempts) +
                        " attempts; scene parameters are infeasible");
}

SightLine trace_sight_line(const Scene& scene, Cell rx) {
  if (!scene.inside(rx.row, rx.col)) {
    throw InvalidArgument("receiver outside grid");
  }
  SightLine out;
  if (scene.in_building(rx.row, rx.col)) {
    out.state = LosState::kInBuilding;
    return out;
  }
  const auto& tx = scene.tx();
  const double r0 = tx.row + 0.5;
  const double c0 = tx.col + 0.5;
  const double r1 = rx.row + 0.5;
  const double c1 = rx.col + 0.5;
  const double z0 = tx.height_m;
  const double z1 = kRxHeightM;
  const double dr = r1 - r0;
  const double dc = c1 - c0;

  // Parameters at which the horizontal projection crosses a cell boundary.
  std::vector<double> ts{0.0, 1.0};
  auto add_crossings = [&ts](double a, double d) {
    if (d == 0.0) return;
    const double lo = std::min(a, a + d);
    const double hi = std::max(a, a + d);
    for (double k = std::floor(lo) + 1.0; k < hi; k += 1.0) {
      ts.push_back((k - a) / d);
    }
  };
  add_crossings(r0, dr);
  add_crossings(c0, dc);
  std::sort(ts.begin(), ts.end());

  std::vector<int> blockers;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double ta = ts[i];
    const double tb = ts[i + 1];
    if (tb - ta <= 1e-12) continue;
    const double tm = 0.5 * (ta + tb);
    const int r = static_cast<int>(std::floor(r0 + tm * dr));
    const int c = static_cast<int>(std::floor(c0 + tm * dc));
    if ((r == tx.row && c == tx.col) || (r == rx.row && c == rx.col)) continue;
    const float h = scene.occluder_at(r, c);
    if (h <= 0.0f) continue;
    // The sight line is linear in t, so its lowest point over the cell is at
    // one of the two boundary crossings.
    const double z_low = std::min(z0 + ta * (z1 - z0), z0 + tb * (z1 - z0));
    if (z_low < h) {
      const int id = scene.occluder_id(r, c);
      if (std::find(blockers.begin(), blockers.end(), id) == blockers.end()) {
        blockers.push_back(id);
      }
    }
  }
  out.blockers = static_cast<int>(blockers.size());
  out.state = blockers.empty() ? LosState::kLos : LosState::kNlos;
  return out;
}

LosState line_of_sight(const Scene& scene, Cell rx) {
  return trace_sight_line(scene, rx).state;
}

ChannelSample in_building_sample() { return ChannelSample{}; }

float multipath_power_ratio_db(double p_direct, double p_total) {
  if (!(p_total > 0.0)) throw InvalidArgument("total power must be positive");
  const double ratio = (p_total - p_direct) / p_total;
  const auto& range = range_of(Channel::kPowerRatio);
  if (!(ratio > 0.0)) return range.lo;
  return range.clamp(static_cast<float>(10.0 * std::log10(ratio)));
}

double correlated_field(std::uint64_t seed, double row, double col,
                        double corr_cells) {
  const double gy = row / corr_cells;
  const double gx = col / corr_cells;
  const double fy0 = std::floor(gy);
  const double fx0 = std::floor(gx);
  auto smooth = [](double f) { return f * f * (3.0 - 2.0 * f); };
  const double sy = smooth(gy - fy0);
  const double sx = smooth(gx - fx0);
  const auto iy = static_cast<std::int64_t>(fy0);
  const auto ix = static_cast<std::int64_t>(fx0);
  auto node = [seed](std::int64_t y, std::int64_t x) {
    return hashed_normal(hash_combine(
        hash_combine(seed, static_cast<std::uint64_t>(y)),
        static_cast<std::uint64_t>(x)));
  };
  const double w[4] = {(1 - sy) * (1 - sx), (1 - sy) * sx, sy * (1 - sx),
                       sy * sx};
  const double v = w[0] * node(iy, ix) + w[1] * node(iy, ix + 1) +
                   w[2] * node(iy + 1, ix) + w[3] * node(iy + 1, ix + 1);
  const double norm =
      std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]);
  return v / norm;
}

ChannelSample trace_channel(const Scene& scene, Cell rx,
                            std::uint64_t noise_seed,
                            const PropagationParams& prop) {
  const SightLine sight = trace_sight_line(scene, rx);
  if (sight.state == LosState::kInBuilding) return in_building_sample();
  const bool los = sight.state == LosState::kLos;

  const auto& tx = scene.tx();
  const double cell = scene.cell_size_m();
  const double dh = (rx.row - tx.row) * cell;
  const double dw = (rx.col - tx.col) * cell;
  const double dz = tx.height_m - kRxHeightM;
  const double d3 = std::max(1.0, std::sqrt(dh * dh + dw * dw + dz * dz));

  auto field = [&](std::uint64_t k) {
    return correlated_field(hash_combine(noise_seed, k), rx.row, rx.col,
                            prop.shadowing_corr_cells);
  };
  const std::uint64_t cell_key = hash_combine(
      hash_combine(noise_seed, 0xCE11u),
      static_cast<std::uint64_t>(rx.row) * 1000003u +
          static_cast<std::uint64_t>(rx.col));

  ChannelSample s;
  s.los = sight.state;

  // Path loss: free-space reference at 1 m plus log-distance slope.
  constexpr double kPi = 3.14159265358979323846;
  const double lambda = 0.299792458 / prop.frequency_ghz;
  const double fspl_1m = 20.0 * std::log10(4.0 * kPi / lambda);
  const double exponent = los ? prop.exponent_los : prop.exponent_nlos;
  double loss = fspl_1m + 10.0 * exponent * std::log10(d3);
  if (!los) {
    loss += prop.diffraction_db *
            std::min(sight.blockers, prop.max_diffraction_blockers);
  }
  loss += prop.shadowing_sigma_db * field(1) +
          prop.jitter_sigma_db * hashed_normal(cell_key);
  s.pl_db = range_of(Channel::kPathLoss).clamp(static_cast<float>(-loss));

  // Multipath power ratio: no direct ray in NLOS.
  if (los) {
    const double k_db = prop.k_factor_10m_db -
                        prop.k_factor_slope_db * std::log10(d3 / 10.0) +
                        2.0 * field(2);
    const double k_lin = std::pow(10.0, k_db / 10.0);
    s.rp_db = multipath_power_ratio_db(k_lin, k_lin + 1.0);
  } else {
    s.rp_db = multipath_power_ratio_db(0.0, 1.0);
  }

  const double nb = sight.blockers;
  const double ds = los ? 15.0 + 0.12 * d3 : 60.0 + 0.25 * d3 + 20.0 * nb;
  const double phi = los ? 20.0 + 0.05 * d3 : 45.0 + 0.08 * d3 + 8.0 * nb;
  const double theta = los ? 3.0 + 600.0 / (d3 + 30.0)
                           : 8.0 + 900.0 / (d3 + 40.0) + 2.0 * nb;
  s.ds_ns = range_of(Channel::kDelaySpread)
                .clamp(static_cast<float>(ds * std::exp(prop.spread_sigma * field(3))));
  s.phi_deg = range_of(Channel::kAzimuthSpread)
                  .clamp(static_cast<float>(phi * std::exp(prop.spread_sigma * field(4))));
  s.theta_deg = range_of(Channel::kElevationSpread)
                    .clamp(static_cast<float>(theta * std::exp(prop.spread_sigma * field(5))));
  return s;
}

ChannelMap render_maps(const Scene& scene, std::uint64_t noise_seed,
                       const PropagationParams& prop) {
  ChannelMap map(scene.grid_h(), scene.grid_w());
  map.meta.noise_seed = noise_seed;
  map.meta.cell_size_m = scene.cell_size_m();
  for (int r = 0; r < scene.grid_h(); ++r) {
    for (int c = 0; c < scene.grid_w(); ++c) {
      const ChannelSample s = trace_channel(scene, {r, c}, noise_seed, prop);
      map.at(Channel::kHeight, r, c) = scene.height_at(r, c);
      map.at(Channel::kPathLoss, r, c) = s.pl_db;
      map.at(Channel::kPowerRatio, r, c) = s.rp_db;
      map.at(Channel::kDelaySpread, r, c) = s.ds_ns;
      map.at(Channel::kAzimuthSpread, r, c) = s.phi_deg;
      map.at(Channel::kElevationSpread, r, c) = s.theta_deg;
      map.at(Channel::kLosCode, r, c) = los_code(s.los);
    }
  }
  return map;
}

}  // namespace chansr::scene
