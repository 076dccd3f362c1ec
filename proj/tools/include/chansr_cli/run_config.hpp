// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chansr/error.hpp"
#include "chansr/generate.hpp"
#include "chansr/model.hpp"
#include "chansr/train.hpp"

namespace chansr::cli {

// Bad config file, unknown key, or a value outside its domain. Maps to the
// usage exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every tunable of the four subcommands. JSON sections: scene, dataset,
/// model, train, eval.
struct RunConfig {
  dataset::GenerateOptions generate;
  std::string data_dir = "runs/data";

  model::ArchConfig arch;
  train::TrainConfig train;
  std::vector<int> train_scales{2};
  std::string stage = "both";  // pretrain | finetune | both
  std::string from;            // checkpoint to fine-tune from
  std::string run_dir = "runs/train";

  /// Empty: <run_dir>/s<scale>/finetune.ckpt. "{s}" expands to the scale.
  std::string checkpoint;
  std::vector<int> eval_scales{2, 4, 8};
  std::string eval_dir = "runs/eval";
  std::vector<std::string> variants{"STL", "MTL", "MTL+RES", "MTL+RES+DA"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int ablation_scale = 2;

  /// Acceptance gates; unset gates are not checked.
  std::optional<double> max_pl_mae_ratio;
  std::optional<double> min_accuracy_margin;
  std::optional<double> ablation_tolerance;

  /// Throws ConfigError.
  void validate() const;
};

/// Pretty JSON with every key present.
std::string to_json(const RunConfig& config);

/// Layers `text` over the defaults. Unknown keys, wrong types and invalid
/// values throw ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// "section.key = default" lines for --help.
std::string describe_keys();

/// Parses "2,4,8" style lists; throws ConfigError.
std::vector<int> parse_int_list(const std::string& text);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<std::string> parse_string_list(const std::string& text);

}  // namespace chansr::cli
