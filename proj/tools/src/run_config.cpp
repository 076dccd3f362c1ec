// SPDX-License-Identifier: Apache-2.0
#include "chansr_cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chansr/ablation.hpp"

namespace chansr::cli {

using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json tree(const RunConfig& c) {
  const auto& g = c.generate;
  ordered_json j;
  j["scene"] = {
      {"scenes", g.scenes},
      {"grid", g.grid},
      {"seed", g.scene_seed},
      {"noise_seed", g.noise_seed},
      {"cell_size_m", g.scene.cell_size_m},
      {"min_coverage", g.scene.min_coverage},
      {"max_coverage", g.scene.max_coverage},
      {"min_side", g.scene.min_side},
      {"max_side", g.scene.max_side},
      {"min_height_m", g.scene.min_height_m},
      {"max_height_m", g.scene.max_height_m},
      {"tx_mast_min_m", g.scene.tx_mast_min_m},
      {"tx_mast_max_m", g.scene.tx_mast_max_m},
      {"max_attempts", g.scene.max_attempts},
      {"frequency_ghz", g.propagation.frequency_ghz},
      {"shadowing_sigma_db", g.propagation.shadowing_sigma_db},
  };
  j["dataset"] = {
      {"dir", c.data_dir},
      {"split_seed", g.split_seed},
      {"split_ratio", g.split_ratio},
      {"scales", g.scales},
      {"augmentation", g.augmentation},
  };
  j["model"] = {
      {"n_blocks", c.arch.n_blocks},
      {"block_mid", c.arch.block_mid},
      {"head_mid", c.arch.head_mid},
      {"residual", c.arch.residual},
  };
  j["train"] = {
      {"epochs", {c.train.epochs_pretrain, c.train.epochs_finetune}},
      {"learning_rate", c.train.learning_rate},
      {"batch_size", c.train.batch_size},
      {"scales", c.train_scales},
      {"init_seed", c.train.init_seed},
      {"shuffle_seed", c.train.shuffle_seed},
      {"augmentation", c.train.augmentation},
      {"eval_every_epoch", c.train.eval_every_epoch},
      {"stage", c.stage},
      {"from", c.from},
      {"run_dir", c.run_dir},
  };
  j["eval"] = {
      {"checkpoint", c.checkpoint},
      {"scales", c.eval_scales},
      {"out", c.eval_dir},
      {"variants", c.variants},
      {"seeds", c.seeds},
      {"ablation_scale", c.ablation_scale},
      {"max_pl_mae_ratio", opt(c.max_pl_mae_ratio)},
      {"min_accuracy_margin", opt(c.min_accuracy_margin)},
      {"ablation_tolerance", opt(c.ablation_tolerance)},
  };
  return j;
}

// Overlays `user` on `base`, refusing keys absent from `base`. A null
// default accepts a number or null.
void merge(ordered_json& base, const ordered_json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key);
      continue;
    }
    const auto& v = it.value();
    const bool ok = slot.is_null()      ? (v.is_null() || v.is_number())
                    : slot.is_boolean() ? v.is_boolean()
                    : slot.is_string()  ? v.is_string()
                    : slot.is_array()   ? v.is_array()
                    : slot.is_number_float() ? v.is_number()
                                             : (v.is_number_integer() || v.is_number_unsigned());
    if (!ok) throw ConfigError("config key '" + key + "' has the wrong type");
    slot = v;
  }
}

template <typename T>
T get(const ordered_json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + section + "." + key + "': " + e.what());
  }
}

std::optional<double> get_opt(const ordered_json& j, const char* key) {
  const auto& v = j.at("eval").at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

RunConfig from_tree(const ordered_json& j) {
  RunConfig c;
  auto& g = c.generate;
  g.scenes = get<int>(j, "scene", "scenes");
  g.grid = get<int>(j, "scene", "grid");
  g.scene_seed = get<std::uint64_t>(j, "scene", "seed");
  g.noise_seed = get<std::uint64_t>(j, "scene", "noise_seed");
  g.scene.cell_size_m = get<double>(j, "scene", "cell_size_m");
  g.scene.min_coverage = get<double>(j, "scene", "min_coverage");
  g.scene.max_coverage = get<double>(j, "scene", "max_coverage");
  g.scene.min_side = get<int>(j, "scene", "min_side");
  g.scene.max_side = get<int>(j, "scene", "max_side");
  g.scene.min_height_m = get<float>(j, "scene", "min_height_m");
  g.scene.max_height_m = get<float>(j, "scene", "max_height_m");
  g.scene.tx_mast_min_m = get<float>(j, "scene", "tx_mast_min_m");
  g.scene.tx_mast_max_m = get<float>(j, "scene", "tx_mast_max_m");
  g.scene.max_attempts = get<int>(j, "scene", "max_attempts");
  g.propagation.frequency_ghz = get<double>(j, "scene", "frequency_ghz");
  g.propagation.shadowing_sigma_db = get<double>(j, "scene", "shadowing_sigma_db");

  c.data_dir = get<std::string>(j, "dataset", "dir");
  g.split_seed = get<std::uint64_t>(j, "dataset", "split_seed");
  g.split_ratio = get<double>(j, "dataset", "split_ratio");
  g.scales = get<std::vector<int>>(j, "dataset", "scales");
  g.augmentation = get<bool>(j, "dataset", "augmentation");

  c.arch.n_blocks = get<int>(j, "model", "n_blocks");
  c.arch.block_mid = get<int>(j, "model", "block_mid");
  c.arch.head_mid = get<int>(j, "model", "head_mid");
  c.arch.residual = get<bool>(j, "model", "residual");

  const auto epochs = get<std::vector<int>>(j, "train", "epochs");
  if (epochs.size() != 2) throw ConfigError("train.epochs must be [pretrain, finetune]");
  c.train.epochs_pretrain = epochs[0];
  c.train.epochs_finetune = epochs[1];
  c.train.learning_rate = get<double>(j, "train", "learning_rate");
  c.train.batch_size = get<int>(j, "train", "batch_size");
  c.train_scales = get<std::vector<int>>(j, "train", "scales");
  c.train.init_seed = get<std::uint64_t>(j, "train", "init_seed");
  c.train.shuffle_seed = get<std::uint64_t>(j, "train", "shuffle_seed");
  c.train.augmentation = get<bool>(j, "train", "augmentation");
  c.train.eval_every_epoch = get<bool>(j, "train", "eval_every_epoch");
  c.stage = get<std::string>(j, "train", "stage");
  c.from = get<std::string>(j, "train", "from");
  c.run_dir = get<std::string>(j, "train", "run_dir");
  if (!c.train_scales.empty()) c.train.scale = c.train_scales.front();

  c.checkpoint = get<std::string>(j, "eval", "checkpoint");
  c.eval_scales = get<std::vector<int>>(j, "eval", "scales");
  c.eval_dir = get<std::string>(j, "eval", "out");
  c.variants = get<std::vector<std::string>>(j, "eval", "variants");
  c.seeds = get<std::vector<std::uint64_t>>(j, "eval", "seeds");
  c.ablation_scale = get<int>(j, "eval", "ablation_scale");
  c.max_pl_mae_ratio = get_opt(j, "max_pl_mae_ratio");
  c.min_accuracy_margin = get_opt(j, "min_accuracy_margin");
  c.ablation_tolerance = get_opt(j, "ablation_tolerance");
  return c;
}

void flatten(const ordered_json& j, const std::string& prefix, std::ostringstream& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      flatten(it.value(), key, out);
    } else {
      out << "  " << key << " = " << it.value().dump() << '\n';
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  try {
    generate.validate();
    arch.validate();
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  auto check_scales = [this](const std::vector<int>& scales, const char* key) {
    if (scales.empty()) throw ConfigError(std::string(key) + " must not be empty");
    for (int s : scales) {
      if (s < 1 || generate.grid % s != 0) {
        throw ConfigError(std::string(key) + ": scale " + std::to_string(s) +
                          " must be >= 1 and divide the grid");
      }
    }
  };
  check_scales(train_scales, "train.scales");
  check_scales(eval_scales, "eval.scales");
  check_scales({ablation_scale}, "eval.ablation_scale");
  if (stage != "pretrain" && stage != "finetune" && stage != "both") {
    throw ConfigError("train.stage must be pretrain, finetune or both");
  }
  if (variants.empty()) throw ConfigError("eval.variants must not be empty");
  for (const auto& v : variants) {
    try {
      eval::variant_from_string(v);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (seeds.empty()) throw ConfigError("eval.seeds must not be empty");
  if (data_dir.empty() || run_dir.empty() || eval_dir.empty()) {
    throw ConfigError("output directories must not be empty");
  }
}

std::string to_json(const RunConfig& config) { return tree(config).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  ordered_json user;
  try {
    user = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  auto base = tree(RunConfig{});
  merge(base, user, "");
  auto config = from_tree(base);
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string describe_keys() {
  std::ostringstream out;
  out << "Config keys (JSON sections) and defaults:\n";
  flatten(tree(RunConfig{}), "", out);
  return out.str();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + text + "' is not a comma-separated integer list");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (int v : parse_int_list(text)) {
    if (v < 0) throw ConfigError("seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace chansr::cli
