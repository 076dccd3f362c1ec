// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/grid.hpp"

namespace chansr::dataset {

/// Low-resolution input: decimated by `scale` and interpolated back to the
/// source shape.
struct DegradedMap {
  Grid4 data;
  int scale = 1;
};

/// Keeps every `s`-th cell from (0, 0) and bilinearly re-expands to the full
/// grid; cells past the last anchor row/column repeat that anchor. The LOS
/// code channel uses the nearest anchor (ties go to the lower index).
DegradedMap degrade(const ChannelMap& hr, int s);

/// Same procedure on an arbitrary grid; `nearest_channel` (or -1) selects
/// the channel resampled by nearest anchor.
Grid4 degrade_grid(const Grid4& hr, int s, int nearest_channel);

enum class Transform {
  kIdentity,
  kRot90,
  kRot180,
  kRot270,
  kFlipHorizontal,
  kFlipVertical,
  kTranspose,
};

std::string to_string(Transform t);

/// Applies a lossless cell permutation to every channel of the grid.
Grid4 apply_transform(const Grid4& g, Transform t);
ChannelMap apply_transform(const ChannelMap& m, Transform t);

/// The six variants used for training-set augmentation.
inline constexpr std::array<Transform, 6> kAugmentations = {
    Transform::kIdentity,       Transform::kRot90,       Transform::kRot180,
    Transform::kRot270,         Transform::kFlipHorizontal,
    Transform::kFlipVertical};

/// Original plus three rotations and two flips of each input, in that order.
std::vector<ChannelMap> augment(const std::vector<ChannelMap>& samples);

/// Affine map of each channel onto [0, 1]. Default bounds are the normal
/// ranges widened to include the in-building sentinels.
struct Normalization {
  std::array<float, kNumChannels> lo{};
  std::array<float, kNumChannels> hi{};

  static Normalization defaults();

  float normalize(int c, float v) const { return (v - lo[c]) / (hi[c] - lo[c]); }
  float denormalize(int c, float v) const { return lo[c] + v * (hi[c] - lo[c]); }
  float scale(int c) const { return hi[c] - lo[c]; }
  Grid4 normalize(const Grid4& g) const;

  bool operator==(const Normalization&) const = default;
};

struct SampleEntry {
  std::string id;
  std::string file;
  std::string scene_id;
  std::uint64_t scene_seed = 0;
  std::uint64_t noise_seed = 0;
  int channels = kNumChannels;
  int height = 0;
  int width = 0;
  std::string split;  // "train" or "test"

  bool operator==(const SampleEntry&) const = default;
};

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::vector<SampleEntry> samples;
  std::vector<int> scales{2, 4, 8};
  bool augmentation = true;
  std::uint64_t scene_seed = 0;
  std::uint64_t noise_seed = 0;
  std::uint64_t split_seed = 0;
  double split_ratio = 0.7;
  double cell_size_m = 5.0;
  Normalization normalization = Normalization::defaults();

  bool operator==(const DatasetManifest&) const = default;
};

/// Scene-level random partition; augmentation happens afterwards on the
/// training side only. Throws InvalidArgument on an empty manifest or a
/// ratio outside (0, 1).
std::pair<std::vector<SampleEntry>, std::vector<SampleEntry>> split(
    const DatasetManifest& manifest, double ratio, std::uint64_t seed);

/// Writes `maps[i]` as `manifest.samples[i].file` plus manifest.json.
void save_dataset(const std::filesystem::path& dir,
                  const DatasetManifest& manifest,
                  const std::vector<ChannelMap>& maps);

/// Manifest plus on-demand sample loading.
class Dataset {
 public:
  Dataset(std::filesystem::path dir, DatasetManifest manifest)
      : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::size_t size() const { return manifest_.samples.size(); }
  ChannelMap load(std::size_t i) const;
  std::vector<ChannelMap> load_split(const std::string& tag) const;

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
};

/// Parses and validates manifest.json and checks every sample header.
Dataset load_dataset(const std::filesystem::path& dir);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Sample file: 28-byte header ("CSRD", u16 version, u32 C/H/W, reserved)
/// then C*H*W little-endian float32 values, channel-major.
void write_sample_file(const std::filesystem::path& path, const Grid4& data);
Grid4 read_sample_file(const std::filesystem::path& path);

inline constexpr std::size_t kSampleHeaderBytes = 28;

}  // namespace chansr::dataset
