// SPDX-License-Identifier: Apache-2.0
#include "chansr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::dataset {

namespace {

struct Tap {
  int a0;
  int a1;
  double frac;
  int nearest;
};

// Interpolation taps along one axis for decimation factor s.
std::vector<Tap> axis_taps(int n, int s) {
  std::vector<Tap> taps(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int a0 = (i / s) * s;
    int a1 = a0 + s;
    double frac = static_cast<double>(i - a0) / s;
    if (a1 > n - 1) {
      a1 = a0;
      frac = 0.0;
    }
    const int nearest = 2 * (i - a0) <= s ? a0 : a1;
    taps[static_cast<std::size_t>(i)] = {a0, a1, frac, nearest};
  }
  return taps;
}

}  // namespace

Grid4 degrade_grid(const Grid4& hr, int s, int nearest_channel) {
  if (s <= 0) throw InvalidArgument("scale factor must be positive");
  if (hr.h() % s != 0 || hr.w() % s != 0) {
    throw InvalidArgument("scale factor " + std::to_string(s) +
                          " does not divide grid " + hr.shape().str());
  }
  const auto ty = axis_taps(hr.h(), s);
  const auto tx = axis_taps(hr.w(), s);
  Grid4 out(hr.shape());
  for (int n = 0; n < hr.n(); ++n) {
    for (int c = 0; c < hr.c(); ++c) {
      for (int y = 0; y < hr.h(); ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < hr.w(); ++x) {
          const Tap& b = tx[static_cast<std::size_t>(x)];
          if (c == nearest_channel) {
            out(n, c, y, x) = hr(n, c, a.nearest, b.nearest);
            continue;
          }
          const double v00 = hr(n, c, a.a0, b.a0);
          const double v01 = hr(n, c, a.a0, b.a1);
          const double v10 = hr(n, c, a.a1, b.a0);
          const double v11 = hr(n, c, a.a1, b.a1);
          const double v = (1.0 - a.frac) * ((1.0 - b.frac) * v00 + b.frac * v01) +
                           a.frac * ((1.0 - b.frac) * v10 + b.frac * v11);
          out(n, c, y, x) = static_cast<float>(v);
        }
      }
    }
  }
  return out;
}

DegradedMap degrade(const ChannelMap& hr, int s) {
  return {degrade_grid(hr.data, s, ch(Channel::kLosCode)), s};
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::kIdentity: return "identity";
    case Transform::kRot90: return "rot90";
    case Transform::kRot180: return "rot180";
    case Transform::kRot270: return "rot270";
    case Transform::kFlipHorizontal: return "flip_h";
    case Transform::kFlipVertical: return "flip_v";
    case Transform::kTranspose: return "transpose";
  }
  return "?";
}

Grid4 apply_transform(const Grid4& g, Transform t) {
  const int h = g.h();
  const int w = g.w();
  const bool swaps = t == Transform::kRot90 || t == Transform::kRot270 ||
                     t == Transform::kTranspose;
  Grid4 out(g.n(), g.c(), swaps ? w : h, swaps ? h : w);
  for (int n = 0; n < g.n(); ++n) {
    for (int c = 0; c < g.c(); ++c) {
      for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) {
          int sy = y;
          int sx = x;
          switch (t) {
            case Transform::kIdentity: break;
            case Transform::kRot90: sy = h - 1 - x; sx = y; break;  // clockwise
            case Transform::kRot180: sy = h - 1 - y; sx = w - 1 - x; break;
            case Transform::kRot270: sy = x; sx = w - 1 - y; break;
            case Transform::kFlipHorizontal: sx = w - 1 - x; break;
            case Transform::kFlipVertical: sy = h - 1 - y; break;
            case Transform::kTranspose: sy = x; sx = y; break;
          }
          out(n, c, y, x) = g(n, c, sy, sx);
        }
      }
    }
  }
  return out;
}

ChannelMap apply_transform(const ChannelMap& m, Transform t) {
  ChannelMap out;
  out.data = apply_transform(m.data, t);
  out.meta = m.meta;
  if (t != Transform::kIdentity) {
    out.meta.transform = m.meta.transform == "identity"
                             ? to_string(t)
                             : m.meta.transform + "+" + to_string(t);
  }
  return out;
}

std::vector<ChannelMap> augment(const std::vector<ChannelMap>& samples) {
  if (samples.empty()) throw InvalidArgument("augment: empty sample list");
  std::vector<ChannelMap> out;
  out.reserve(samples.size() * kAugmentations.size());
  for (const auto& s : samples) {
    for (Transform t : kAugmentations) out.push_back(apply_transform(s, t));
  }
  return out;
}

Normalization Normalization::defaults() {
  Normalization n;
  n.lo = {0.0f, -200.0f, -30.0f, -100.0f, -360.0f, -180.0f, -1.0f};
  n.hi = {kMaxBuildingHeightM, 200.0f, 100.0f, 500.0f, 360.0f, 180.0f, 1.0f};
  return n;
}

Grid4 Normalization::normalize(const Grid4& g) const {
  if (g.c() != kNumChannels) {
    throw ShapeError("normalize expects 7 channels, got " + g.shape().str());
  }
  Grid4 out(g.shape());
  for (int n = 0; n < g.n(); ++n) {
    for (int c = 0; c < g.c(); ++c) {
      auto src = g.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = normalize(c, src[i]);
    }
  }
  return out;
}

std::pair<std::vector<SampleEntry>, std::vector<SampleEntry>> split(
    const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  if (manifest.samples.empty()) throw InvalidArgument("split: empty manifest");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InvalidArgument("split ratio must lie in (0, 1)");
  }
  // Partition distinct scenes, never individual samples.
  std::vector<std::string> scenes;
  for (const auto& s : manifest.samples) {
    if (std::find(scenes.begin(), scenes.end(), s.scene_id) == scenes.end()) {
      scenes.push_back(s.scene_id);
    }
  }
  std::sort(scenes.begin(), scenes.end());
  Rng rng(seed);
  for (std::size_t i = scenes.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(scenes[i - 1], scenes[j]);
  }
  auto n_train = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(scenes.size())));
  if (scenes.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, scenes.size() - 1);
  std::vector<std::string> train_scenes(scenes.begin(),
                                        scenes.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::pair<std::vector<SampleEntry>, std::vector<SampleEntry>> out;
  for (const auto& s : manifest.samples) {
    const bool is_train = std::find(train_scenes.begin(), train_scenes.end(),
                                    s.scene_id) != train_scenes.end();
    SampleEntry e = s;
    e.split = is_train ? "train" : "test";
    (is_train ? out.first : out.second).push_back(std::move(e));
  }
  return out;
}

}  // namespace chansr::dataset
