// SPDX-License-Identifier: Apache-2.0
#include "chansr_cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "chansr/ablation.hpp"
#include "chansr/checkpoint.hpp"
#include "chansr/generate.hpp"
#include "chansr/report.hpp"
#include "chansr/scene.hpp"

namespace chansr::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string join(const std::vector<int>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

struct Splits {
  dataset::Dataset data;
  std::vector<ChannelMap> train;
  std::vector<ChannelMap> test;
};

Splits load_splits(const RunConfig& config) {
  auto data = dataset::load_dataset(config.data_dir);
  auto train = data.load_split("train");
  auto test = data.load_split("test");
  if (train.empty()) throw InvalidArgument("dataset has no training samples");
  return {std::move(data), std::move(train), std::move(test)};
}

fs::path scale_dir(const RunConfig& config, int s) {
  return fs::path(config.run_dir) / ("s" + std::to_string(s));
}

}  // namespace

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "resolved_config.json").string());
  out << to_json(config);
}

fs::path checkpoint_for_scale(const RunConfig& config, int scale) {
  if (config.checkpoint.empty()) return scale_dir(config, scale) / "finetune.ckpt";
  std::string p = config.checkpoint;
  for (auto pos = p.find("{s}"); pos != std::string::npos; pos = p.find("{s}")) {
    p.replace(pos, 3, std::to_string(scale));
  }
  return p;
}

int cmd_generate(const RunConfig& config, std::ostream& out) {
  const auto gen = dataset::generate_dataset(config.generate);
  dataset::save_dataset(config.data_dir, gen.manifest, gen.maps);
  write_resolved_config(config, config.data_dir);

  std::size_t n_train = 0;
  double cov_min = 1.0, cov_max = 0.0, cov_sum = 0.0;
  for (std::size_t i = 0; i < gen.maps.size(); ++i) {
    if (gen.manifest.samples[i].split == "train") ++n_train;
    const auto codes = gen.maps[i].data.plane(0, ch(Channel::kLosCode));
    const double cov = static_cast<double>(std::count(codes.begin(), codes.end(),
                                                      kLosCodeInBuilding)) /
                       static_cast<double>(codes.size());
    cov_min = std::min(cov_min, cov);
    cov_max = std::max(cov_max, cov);
    cov_sum += cov;
  }
  out << "generated " << gen.maps.size() << " samples (" << n_train << " train, "
      << gen.maps.size() - n_train << " test) in " << config.data_dir << '\n'
      << "in-building coverage min " << fmt(cov_min) << " mean "
      << fmt(cov_sum / static_cast<double>(gen.maps.size())) << " max " << fmt(cov_max)
      << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  const auto splits = load_splits(config);
  const auto& norm = splits.data.manifest().normalization;
  for (int s : config.train_scales) {
    auto tc = config.train;
    tc.scale = s;
    const fs::path dir = scale_dir(config, s);
    fs::create_directories(dir);
    write_resolved_config(config, dir);
    const fs::path log_path = dir / "train_log.jsonl";
    fs::remove(log_path);
    const auto data = train::prepare_training_data(splits.train, splits.test, tc, norm);
    out << "scale " << s << ": " << data.train.size() << " training samples, "
        << data.test.size() << " test maps\n";

    auto on_epoch = [&](const train::EpochRecord& r) {
      report::append_line(log_path, report::epoch_to_json(r));
      out << "  " << train::to_string(r.stage) << " epoch " << r.epoch << " objective "
          << fmt(r.objective, 5);
      if (r.test) {
        out << " test PL MAE " << fmt(r.test->of(model::Task::kPathLoss).mae)
            << " acc " << fmt(r.test->accuracy, 4);
      }
      out << '\n' << std::flush;
    };

    std::optional<train::Checkpoint> pre;
    if (config.stage == "pretrain" || config.stage == "both") {
      auto res = train::pretrain_stage(model::build_model<float>(config.arch, tc.init_seed),
                                       data, tc, on_epoch);
      train::save_checkpoint(dir / "pretrain.ckpt", res.checkpoint);
      pre = std::move(res.checkpoint);
    } else {
      if (config.from.empty()) {
        throw IoError("fine-tune stage needs a pre-trained checkpoint (train.from / --from)");
      }
      pre = train::load_checkpoint(config.from,
                                   train::config_hash(config.arch, s, norm));
      if (pre->params.config != config.arch) {
        throw ConfigMismatchError("checkpoint architecture differs from model config");
      }
    }

    const train::Checkpoint* final_ckpt = &*pre;
    std::optional<train::Checkpoint> fine;
    if (config.stage == "finetune" || config.stage == "both") {
      auto res = train::finetune_stage(*pre, data, tc, on_epoch);
      train::save_checkpoint(dir / "finetune.ckpt", res.checkpoint);
      fine = std::move(res.checkpoint);
      final_ckpt = &*fine;
    }

    if (!data.test.empty()) {
      std::vector<eval::MetricsReport> reports{
          eval::evaluate_model(final_ckpt->params, data.test, s, norm,
                               std::string(train::to_string(final_ckpt->stage))),
          eval::bilinear_baseline(data.test, s)};
      report::emit_report(reports, dir, "metrics");
      out << report::metrics_table(reports);
    }
  }
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  const auto splits = load_splits(config);
  if (splits.test.empty()) throw InvalidArgument("dataset has no test samples");
  const auto& norm = splits.data.manifest().normalization;
  std::vector<eval::MetricsReport> model_rows, base_rows;
  for (int s : config.eval_scales) {
    const auto ckpt = train::load_checkpoint(checkpoint_for_scale(config, s),
                                             train::config_hash(config.arch, s, norm));
    model_rows.push_back(eval::evaluate_model(ckpt.params, splits.test, s, norm, "model"));
    base_rows.push_back(eval::bilinear_baseline(splits.test, s));
  }
  std::vector<eval::MetricsReport> rows = model_rows;
  rows.insert(rows.end(), base_rows.begin(), base_rows.end());
  const std::string stem = "eval_x" + join(config.eval_scales, "-") + "_seed" +
                           std::to_string(config.train.init_seed);
  report::emit_report(rows, config.eval_dir, stem);
  write_resolved_config(config, config.eval_dir);
  out << report::metrics_table(rows);

  bool violated = false;
  for (std::size_t i = 0; i < model_rows.size(); ++i) {
    const double m = model_rows[i].of(model::Task::kPathLoss).mae;
    const double b = base_rows[i].of(model::Task::kPathLoss).mae;
    if (config.max_pl_mae_ratio && m > *config.max_pl_mae_ratio * b) {
      out << "threshold violated at x" << model_rows[i].scale << ": PL MAE ratio "
          << fmt(m / b) << " > " << fmt(*config.max_pl_mae_ratio) << '\n';
      violated = true;
    }
    const double margin = model_rows[i].accuracy - base_rows[i].accuracy;
    if (config.min_accuracy_margin && margin < *config.min_accuracy_margin) {
      out << "threshold violated at x" << model_rows[i].scale << ": accuracy margin "
          << fmt(margin, 4) << " < " << fmt(*config.min_accuracy_margin, 4) << '\n';
      violated = true;
    }
  }
  return violated ? kExitThreshold : kExitOk;
}

int cmd_ablate(const RunConfig& config, std::ostream& out) {
  const auto splits = load_splits(config);
  if (splits.test.empty()) throw InvalidArgument("dataset has no test samples");
  std::vector<eval::Variant> variants;
  for (const auto& v : config.variants) variants.push_back(eval::variant_from_string(v));
  auto tc = config.train;
  tc.scale = config.ablation_scale;
  const auto table = eval::run_ablation(splits.train, splits.test, variants, config.seeds,
                                        config.arch, tc, splits.data.manifest().normalization);
  std::string seeds;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    seeds += (i ? "-" : "") + std::to_string(config.seeds[i]);
  }
  report::emit_ablation(table, config.eval_dir,
                        "ablation_x" + std::to_string(table.scale) + "_seeds" + seeds);
  write_resolved_config(config, config.eval_dir);
  out << report::ablation_table(table);

  if (!config.ablation_tolerance) return kExitOk;
  auto median_of = [&](eval::Variant v) -> std::optional<double> {
    for (const auto& r : table.rows) {
      if (r.variant == v) return r.median_mae;
    }
    return std::nullopt;
  };
  const double tol = *config.ablation_tolerance;
  bool violated = false;
  const std::array<eval::Variant, 3> order{eval::Variant::kStl, eval::Variant::kMtl,
                                           eval::Variant::kMtlRes};
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto hi = median_of(order[i]);
    const auto lo = median_of(order[i + 1]);
    if (hi && lo && *hi < (1.0 - tol) * *lo) {
      out << "threshold violated: " << eval::to_string(order[i]) << " median PL MAE "
          << fmt(*hi) << " below " << eval::to_string(order[i + 1]) << " " << fmt(*lo)
          << " beyond tolerance\n";
      violated = true;
    }
  }
  return violated ? kExitThreshold : kExitOk;
}

}  // namespace chansr::cli
