// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "binary_io.hpp"
#include "chansr/dataset.hpp"
#include "chansr/error.hpp"

namespace chansr::detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace chansr::detail

namespace chansr::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kSampleMagic[4] = {'C', 'S', 'R', 'D'};
constexpr std::uint16_t kSampleVersion = 1;
constexpr const char* kManifestFormat = "chansr-dataset";

}  // namespace

void write_sample_file(const fs::path& path, const Grid4& data) {
  if (data.n() != 1) throw ShapeError("sample grids must have N = 1");
  detail::ByteWriter w;
  w.bytes(kSampleMagic, 4);
  w.u16(kSampleVersion);
  w.u32(static_cast<std::uint32_t>(data.c()));
  w.u32(static_cast<std::uint32_t>(data.h()));
  w.u32(static_cast<std::uint32_t>(data.w()));
  w.zeros(kSampleHeaderBytes - 18);
  for (float v : data.values()) w.f32(v);
  detail::write_file_bytes(path.string(), w.buffer());
}

Grid4 read_sample_file(const fs::path& path) {
  const auto bytes = detail::read_file_bytes(path.string());
  detail::ByteReader r(bytes, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kSampleMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic");
  }
  const auto version = r.u16();
  if (version != kSampleVersion) {
    throw FormatError(path.string() + ": unsupported sample version " +
                      std::to_string(version));
  }
  const auto c = r.u32();
  const auto h = r.u32();
  const auto w = r.u32();
  r.skip(kSampleHeaderBytes - 18);
  const std::uint64_t count = static_cast<std::uint64_t>(c) * h * w;
  if (r.remaining() != count * 4) {
    throw FormatError(path.string() + ": payload holds " +
                      std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(count * 4));
  }
  Grid4 g(1, static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
  for (auto& v : g.values()) v = r.f32();
  return g;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"id", s.id},
                       {"file", s.file},
                       {"scene_id", s.scene_id},
                       {"scene_seed", s.scene_seed},
                       {"noise_seed", s.noise_seed},
                       {"shape", {s.channels, s.height, s.width}},
                       {"split", s.split}});
  }
  json norm = json::array();
  for (int c = 0; c < kNumChannels; ++c) {
    norm.push_back({{"channel", std::string(channel_name(Channel{c}))},
                    {"lo", m.normalization.lo[static_cast<std::size_t>(c)]},
                    {"hi", m.normalization.hi[static_cast<std::size_t>(c)]}});
  }
  json j = {{"format", kManifestFormat},
            {"version", m.format_version},
            {"scales", m.scales},
            {"augmentation", m.augmentation},
            {"seeds",
             {{"scene", m.scene_seed},
              {"noise", m.noise_seed},
              {"split", m.split_seed}}},
            {"split_ratio", m.split_ratio},
            {"cell_size_m", m.cell_size_m},
            {"normalization", norm},
            {"samples", samples}};
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest parse error: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kManifestFormat) {
      throw FormatError("manifest format is not " + std::string(kManifestFormat));
    }
    DatasetManifest m;
    m.format_version = j.at("version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw FormatError("manifest version " + std::to_string(m.format_version) +
                        " unsupported (expected " +
                        std::to_string(kDatasetFormatVersion) + ")");
    }
    m.scales = j.at("scales").get<std::vector<int>>();
    m.augmentation = j.at("augmentation").get<bool>();
    m.scene_seed = j.at("seeds").at("scene").get<std::uint64_t>();
    m.noise_seed = j.at("seeds").at("noise").get<std::uint64_t>();
    m.split_seed = j.at("seeds").at("split").get<std::uint64_t>();
    m.split_ratio = j.at("split_ratio").get<double>();
    m.cell_size_m = j.at("cell_size_m").get<double>();
    const auto& norm = j.at("normalization");
    if (norm.size() != kNumChannels) {
      throw FormatError("manifest normalization must list 7 channels");
    }
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      m.normalization.lo[c] = norm[c].at("lo").get<float>();
      m.normalization.hi[c] = norm[c].at("hi").get<float>();
    }
    for (const auto& s : j.at("samples")) {
      SampleEntry e;
      e.id = s.at("id").get<std::string>();
      e.file = s.at("file").get<std::string>();
      e.scene_id = s.at("scene_id").get<std::string>();
      e.scene_seed = s.at("scene_seed").get<std::uint64_t>();
      e.noise_seed = s.at("noise_seed").get<std::uint64_t>();
      const auto shape = s.at("shape").get<std::vector<int>>();
      if (shape.size() != 3) throw FormatError("sample " + e.id + ": shape must have 3 entries");
      e.channels = shape[0];
      e.height = shape[1];
      e.width = shape[2];
      e.split = s.at("split").get<std::string>();
      if (e.split != "train" && e.split != "test") {
        throw FormatError("sample " + e.id + ": unknown split tag '" + e.split + "'");
      }
      m.samples.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest schema error: ") + e.what());
  }
}

void save_dataset(const fs::path& dir, const DatasetManifest& manifest,
                  const std::vector<ChannelMap>& maps) {
  if (maps.size() != manifest.samples.size()) {
    throw InvalidArgument("save_dataset: manifest lists " +
                          std::to_string(manifest.samples.size()) +
                          " samples but " + std::to_string(maps.size()) +
                          " maps were given");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& e = manifest.samples[i];
    if (maps[i].data.c() != e.channels || maps[i].h() != e.height ||
        maps[i].w() != e.width) {
      throw ShapeError("sample " + e.id + ": map shape " +
                       maps[i].data.shape().str() + " disagrees with manifest");
    }
    write_sample_file(dir / e.file, maps[i].data);
  }
  const std::string text = manifest_to_json(manifest);
  detail::write_file_bytes((dir / "manifest.json").string(),
                           std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw IoError("missing manifest " + manifest_path.string());
  }
  const auto bytes = detail::read_file_bytes(manifest_path.string());
  DatasetManifest m =
      manifest_from_json(std::string(bytes.begin(), bytes.end()));
  for (const auto& e : m.samples) {
    const fs::path p = dir / e.file;
    if (!fs::exists(p)) throw IoError("sample " + e.id + ": missing file " + p.string());
    const auto size = fs::file_size(p);
    const auto expected = kSampleHeaderBytes +
                          4ULL * static_cast<std::uint64_t>(e.channels) *
                              static_cast<std::uint64_t>(e.height) *
                              static_cast<std::uint64_t>(e.width);
    if (size != expected) {
      throw ShapeError("sample " + e.id + ": file holds " + std::to_string(size) +
                       " bytes but manifest shape " + std::to_string(e.channels) +
                       "x" + std::to_string(e.height) + "x" +
                       std::to_string(e.width) + " needs " +
                       std::to_string(expected));
    }
  }
  return Dataset(dir, std::move(m));
}

ChannelMap Dataset::load(std::size_t i) const {
  const SampleEntry& e = manifest_.samples.at(i);
  ChannelMap map;
  map.data = read_sample_file(dir_ / e.file);
  if (map.data.c() != e.channels || map.h() != e.height || map.w() != e.width) {
    throw ShapeError("sample " + e.id + ": file shape " + map.data.shape().str() +
                     " disagrees with manifest " + std::to_string(e.channels) +
                     "x" + std::to_string(e.height) + "x" + std::to_string(e.width));
  }
  map.meta.scene_id = e.scene_id;
  map.meta.scene_seed = e.scene_seed;
  map.meta.noise_seed = e.noise_seed;
  map.meta.cell_size_m = manifest_.cell_size_m;
  return map;
}

std::vector<ChannelMap> Dataset::load_split(const std::string& tag) const {
  std::vector<ChannelMap> out;
  for (std::size_t i = 0; i < manifest_.samples.size(); ++i) {
    if (manifest_.samples[i].split == tag) out.push_back(load(i));
  }
  return out;
}

}  // namespace chansr::dataset
