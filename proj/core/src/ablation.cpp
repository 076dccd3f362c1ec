// SPDX-License-Identifier: Apache-2.0
#include "chansr/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::eval {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kStl: return "STL";
    case Variant::kMtl: return "MTL";
    case Variant::kMtlRes: return "MTL+RES";
    case Variant::kMtlResDa: return "MTL+RES+DA";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Variant v : {Variant::kStl, Variant::kMtl, Variant::kMtlRes, Variant::kMtlResDa}) {
    if (up == to_string(v)) return v;
  }
  throw InvalidArgument("unknown ablation variant '" + std::string(s) + "'");
}

VariantSetup setup_variant(Variant v, const model::ArchConfig& base_arch,
                           const train::TrainConfig& base) {
  VariantSetup s{base_arch, base};
  s.train.augmentation = false;
  s.train.tasks = train::kAllTasksMask;
  switch (v) {
    case Variant::kStl:
      s.arch = model::flat_config(base_arch);
      s.train.tasks = train::kPathLossOnly;
      break;
    case Variant::kMtl:
      s.arch = model::flat_config(base_arch);
      break;
    case Variant::kMtlRes:
      s.arch.residual = true;
      break;
    case Variant::kMtlResDa:
      s.arch.residual = true;
      s.train.augmentation = true;
      break;
  }
  return s;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

unsigned thread_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CHANSR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return cap;
}

AblationTable run_ablation(const std::vector<ChannelMap>& train_maps,
                           const std::vector<ChannelMap>& test_maps,
                           const std::vector<Variant>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const model::ArchConfig& base_arch,
                           const train::TrainConfig& base,
                           const dataset::Normalization& norm,
                           const AblationOptions& options) {
  if (variants.empty()) throw InvalidArgument("ablation needs at least one variant");
  if (seeds.empty()) throw InvalidArgument("ablation needs at least one seed");
  if (test_maps.empty()) throw InvalidArgument("ablation needs a non-empty test split");

  struct Job {
    std::size_t row;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < variants.size(); ++r) {
    for (auto seed : seeds) jobs.push_back({r, seed});
  }
  std::vector<AblationRun> results(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        auto setup = setup_variant(variants[jobs[j].row], base_arch, base);
        setup.train.init_seed = jobs[j].seed;
        setup.train.shuffle_seed = hash_combine(jobs[j].seed, 0x5348u);
        setup.train.eval_every_epoch = false;
        const auto data = train::prepare_training_data(train_maps, test_maps, setup.train, norm);
        const auto trained = train::train_two_stage(setup.arch, data, setup.train);
        AblationRun run;
        run.variant = variants[jobs[j].row];
        run.seed = jobs[j].seed;
        run.report = evaluate_model(trained.finetuned.params, test_maps, setup.train.scale,
                                    norm, std::string(to_string(run.variant)));
        results[j] = std::move(run);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  const unsigned cap = options.threads ? options.threads : thread_cap();
  const auto n_threads = std::min<std::size_t>(cap, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  AblationTable table;
  table.scale = base.scale;
  for (std::size_t r = 0; r < variants.size(); ++r) {
    AblationRow row;
    row.variant = variants[r];
    std::vector<double> mae, stde;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].row != r) continue;
      mae.push_back(results[j].report.of(model::Task::kPathLoss).mae);
      stde.push_back(results[j].report.of(model::Task::kPathLoss).stde);
      row.runs.push_back(results[j]);
    }
    row.median_mae = median(mae);
    row.median_stde = median(stde);
    table.rows.push_back(std::move(row));
  }
  const auto mtl = std::find_if(table.rows.begin(), table.rows.end(),
                                [](const AblationRow& r) { return r.variant == Variant::kMtl; });
  if (mtl != table.rows.end()) {
    const double ref_mae = mtl->median_mae;
    const double ref_stde = mtl->median_stde;
    for (auto& row : table.rows) {
      if (ref_mae > 0) row.gain_mae = (ref_mae - row.median_mae) / ref_mae;
      if (ref_stde > 0) row.gain_stde = (ref_stde - row.median_stde) / ref_stde;
    }
  }
  return table;
}

}  // namespace chansr::eval
