// SPDX-License-Identifier: Apache-2.0
#include "chansr/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "binary_io.hpp"
#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::train {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'R', 'M'};

std::uint64_t hash_double(std::uint64_t h, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  return hash_combine(h, bits);
}

std::vector<std::size_t> tensor_sizes(const model::ModelParams& p) {
  std::vector<std::size_t> sizes;
  for (const auto& t : p.tensors()) sizes.push_back(t.size());
  return sizes;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kInit: return "init";
    case Stage::kPretrain: return "pretrain";
    case Stage::kFinetune: return "finetune";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  if (s == "init") return Stage::kInit;
  if (s == "pretrain") return Stage::kPretrain;
  if (s == "finetune") return Stage::kFinetune;
  throw InvalidArgument("unknown stage '" + std::string(s) + "'");
}

std::uint64_t config_hash(const model::ArchConfig& arch, int scale,
                          const dataset::Normalization& norm) {
  std::uint64_t h = 0x43535246u;
  for (int v : {arch.n_blocks, arch.in_channels, arch.block_mid, arch.head_mid,
                arch.residual ? 1 : 0, scale}) {
    h = hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  }
  for (int v : arch.head_out) h = hash_combine(h, static_cast<std::uint64_t>(v));
  for (int c = 0; c < kNumChannels; ++c) {
    h = hash_double(h, norm.lo[static_cast<std::size_t>(c)]);
    h = hash_double(h, norm.hi[static_cast<std::size_t>(c)]);
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& cfg = ckpt.params.config;
  const auto tensors = ckpt.params.tensors();
  const auto sizes = tensor_sizes(ckpt.params);
  if (ckpt.optimizer.m.size() != sizes.size() || ckpt.optimizer.v.size() != sizes.size()) {
    throw ShapeError("save_checkpoint: optimizer state does not mirror the parameters");
  }

  detail::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kCheckpointVersion);
  w.u16(0);
  for (int v : {cfg.n_blocks, cfg.in_channels, cfg.block_mid, cfg.head_mid}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(cfg.residual ? 1u : 0u);
  for (int v : cfg.head_out) w.u32(static_cast<std::uint32_t>(v));
  w.u64(ckpt.config_hash);
  w.u32(static_cast<std::uint32_t>(ckpt.scale));
  w.u32(static_cast<std::uint32_t>(ckpt.stage));
  w.u32(ckpt.epochs_done);

  w.u64(ckpt.params.count());
  for (const auto& t : tensors) {
    for (float f : t) w.f32(f);
  }
  w.u64(ckpt.optimizer.step);
  w.f64(ckpt.optimizer.config.beta1);
  w.f64(ckpt.optimizer.config.beta2);
  w.f64(ckpt.optimizer.config.eps);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (ckpt.optimizer.m[i].size() != sizes[i] || ckpt.optimizer.v[i].size() != sizes[i]) {
      throw ShapeError("save_checkpoint: optimizer moment shape mismatch");
    }
  }
  for (const auto& m : ckpt.optimizer.m) {
    for (float f : m) w.f32(f);
  }
  for (const auto& v : ckpt.optimizer.v) {
    for (float f : v) w.f32(f);
  }
  detail::write_file_bytes(path.string(), w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_hash) {
  if (!std::filesystem::exists(path)) {
    throw IoError("checkpoint not found: " + path.string());
  }
  const auto bytes = detail::read_file_bytes(path.string());
  detail::ByteReader r(bytes, path.string());
  char magic[4];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  r.u16();

  model::ArchConfig cfg;
  cfg.n_blocks = static_cast<int>(r.u32());
  cfg.in_channels = static_cast<int>(r.u32());
  cfg.block_mid = static_cast<int>(r.u32());
  cfg.head_mid = static_cast<int>(r.u32());
  cfg.residual = r.u32() != 0;
  for (int& v : cfg.head_out) v = static_cast<int>(r.u32());
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": invalid architecture record: " + e.what());
  }
  if (cfg.n_blocks > 1024 || cfg.block_mid > 4096 || cfg.head_mid > 4096 ||
      cfg.in_channels > 4096) {
    throw FormatError(path.string() + ": implausible architecture record");
  }

  Checkpoint ckpt;
  ckpt.config_hash = r.u64();
  ckpt.scale = static_cast<int>(r.u32());
  const auto stage = r.u32();
  if (stage > static_cast<std::uint32_t>(Stage::kFinetune)) {
    throw FormatError(path.string() + ": unknown stage code " + std::to_string(stage));
  }
  ckpt.stage = static_cast<Stage>(stage);
  ckpt.epochs_done = r.u32();

  if (expected_hash && *expected_hash != ckpt.config_hash) {
    std::ostringstream msg;
    msg << path.string() << ": config hash mismatch (checkpoint " << std::hex
        << ckpt.config_hash << ", run " << *expected_hash
        << "); architecture, scale or normalization differ";
    throw ConfigMismatchError(msg.str());
  }

  ckpt.params = model::ModelParams::zeros(cfg);
  const auto count = r.u64();
  if (count != ckpt.params.count()) {
    throw FormatError(path.string() + ": parameter count " + std::to_string(count) +
                      " does not match the architecture (" +
                      std::to_string(ckpt.params.count()) + ")");
  }
  for (auto t : ckpt.params.tensors()) {
    for (float& f : t) f = r.f32();
  }
  const auto sizes = tensor_sizes(ckpt.params);
  AdamConfig ac;
  const auto step = r.u64();
  ac.beta1 = r.f64();
  ac.beta2 = r.f64();
  ac.eps = r.f64();
  ckpt.optimizer = AdamState::zeros(sizes, ac);
  ckpt.optimizer.step = step;
  for (auto& m : ckpt.optimizer.m) {
    for (float& f : m) f = r.f32();
  }
  for (auto& v : ckpt.optimizer.v) {
    for (float& f : v) f = r.f32();
  }
  if (r.remaining() != 0) {
    throw FormatError(path.string() + ": " + std::to_string(r.remaining()) +
                      " trailing bytes");
  }
  return ckpt;
}

}  // namespace chansr::train
