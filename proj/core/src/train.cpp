// SPDX-License-Identifier: Apache-2.0
#include "chansr/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <utility>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::train {

using model::kNumRegressionTasks;
using model::kNumTasks;
using model::Task;

void TrainConfig::validate() const {
  if (epochs_pretrain < 0 || epochs_finetune < 0) {
    throw InvalidArgument("epochs must be >= 0");
  }
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw InvalidArgument("learning_rate must be finite and >= 0");
  }
  if (batch_size != 1) {
    throw InvalidArgument("batch_size " + std::to_string(batch_size) +
                          " unsupported; training steps once per sample");
  }
  if (scale < 1) throw InvalidArgument("scale must be >= 1");
  if (std::none_of(tasks.begin(), tasks.end(), [](bool b) { return b; })) {
    throw InvalidArgument("at least one task must be active");
  }
}

PreparedSample prepare_sample(const ChannelMap& hr, int s,
                              const dataset::Normalization& norm) {
  PreparedSample p;
  p.id = hr.meta.scene_id + ":" + hr.meta.transform;
  p.input = norm.normalize(dataset::degrade(hr, s).data);
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    const int c = t + 1;
    Grid4 g(1, 1, hr.h(), hr.w());
    const auto src = hr.data.plane(0, c);
    for (std::size_t i = 0; i < src.size(); ++i) g.data()[i] = norm.normalize(c, src[i]);
    p.targets[static_cast<std::size_t>(t)] = std::move(g);
  }
  p.onehot = loss::one_hot_classes(hr);
  p.masks = loss::build_masks(hr, s);
  p.valid = loss::valid_count(p.masks);
  if (p.valid == 0) {
    throw InvalidArgument("sample " + p.id + " has no valid cell at scale " +
                          std::to_string(s));
  }
  return p;
}

TrainingData prepare_training_data(const std::vector<ChannelMap>& train_maps,
                                   const std::vector<ChannelMap>& test_maps,
                                   const TrainConfig& config,
                                   const dataset::Normalization& norm) {
  config.validate();
  if (train_maps.empty()) throw InvalidArgument("training split is empty");
  TrainingData d;
  d.scale = config.scale;
  d.norm = norm;
  const auto maps = config.augmentation ? dataset::augment(train_maps) : train_maps;
  d.train.reserve(maps.size());
  for (const auto& m : maps) d.train.push_back(prepare_sample(m, config.scale, norm));
  d.test = test_maps;
  return d;
}

std::array<double, kNumTasks> task_losses(const model::ModelOutput& out,
                                          const PreparedSample& s) {
  std::array<double, kNumTasks> l{};
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    l[static_cast<std::size_t>(t)] = loss::l1_task_loss(
        out.regression[static_cast<std::size_t>(t)], s.targets[static_cast<std::size_t>(t)],
        s.masks, s.valid);
  }
  l[kNumTasks - 1] = loss::ce_task_loss(out.probs, s.onehot, s.masks, s.valid);
  return l;
}

namespace {

// Loss gradient w.r.t. the raw output of task t (probabilities for LOS).
template <typename T>
BasicGrid<T> task_output_grad(const model::BasicModelOutput<T>& out, Task t,
                              const BasicGrid<T>& target, const BasicGrid<T>& onehot,
                              const loss::MaskPair& masks, std::size_t n, double scale) {
  BasicGrid<T> g = t == Task::kLos
                       ? loss::ce_task_loss_grad(out.probs, onehot, masks, n)
                       : loss::l1_task_loss_grad(out.task(t), target, masks, n);
  if (scale != 1.0) {
    for (auto& v : g.values()) v = static_cast<T>(v * scale);
  }
  return g;
}

std::vector<std::size_t> active_indices(const TaskMask& tasks) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, Stage stage,
                                     int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(stage)),
                       static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<std::size_t> tensor_sizes(const model::ModelParams& p) {
  std::vector<std::size_t> sizes;
  for (const auto& t : p.tensors()) sizes.push_back(t.size());
  return sizes;
}

void check_data(const TrainingData& data, const TrainConfig& config) {
  config.validate();
  if (data.scale != config.scale) {
    throw InvalidArgument("training data prepared at scale " + std::to_string(data.scale) +
                          " but config requests scale " + std::to_string(config.scale));
  }
  if (data.train.empty()) throw InvalidArgument("no training samples");
}

EpochRecord finish_epoch(Stage stage, int epoch, std::uint64_t steps,
                         std::array<double, kNumTasks> loss_sum, double objective_sum,
                         std::size_t n, const model::ModelParams& params,
                         const TrainingData& data, const TrainConfig& config,
                         std::chrono::steady_clock::time_point start) {
  EpochRecord rec;
  rec.stage = stage;
  rec.epoch = epoch;
  rec.steps = steps;
  for (std::size_t t = 0; t < loss_sum.size(); ++t) {
    rec.train_loss[t] = loss_sum[t] / static_cast<double>(n);
    rec.sigma[t] = std::exp(static_cast<double>(params.log_sigma[t]));
  }
  rec.objective = objective_sum / static_cast<double>(n);
  if (config.eval_every_epoch && !data.test.empty()) {
    rec.test = eval::evaluate_model(params, data.test, data.scale, data.norm,
                                    std::string(to_string(stage)));
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

StageResult pretrain_stage(const model::ModelParams& init, const TrainingData& data,
                           const TrainConfig& config, const EpochCallback& on_epoch) {
  check_data(data, config);
  StageResult res;
  Checkpoint& ck = res.checkpoint;
  ck.params = init;
  ck.optimizer = AdamState::zeros(tensor_sizes(init));
  ck.config_hash = config_hash(init.config, data.scale, data.norm);
  ck.scale = data.scale;
  ck.stage = Stage::kPretrain;

  const auto active = active_indices(config.tasks);
  const auto names = model::tensor_names(init.config);
  auto grads = model::ModelParams::zeros(init.config);
  model::ForwardCache<float> cache;
  const auto start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs_pretrain; ++epoch) {
    std::array<double, kNumTasks> loss_sum{};
    double objective_sum = 0.0;
    for (std::size_t i : epoch_order(data.train.size(), config.shuffle_seed,
                                     Stage::kPretrain, epoch)) {
      const PreparedSample& s = data.train[i];
      const auto out = model::forward(ck.params, s.input, &cache);
      const auto l = task_losses(out, s);
      std::vector<double> lv, sv;
      for (std::size_t t : active) {
        lv.push_back(l[t]);
        sv.push_back(ck.params.log_sigma[t]);
      }
      const auto mtl = loss::mtl_loss(lv, sv);

      model::TaskGradients<float> up;
      up.has_log_sigma = true;
      for (std::size_t j = 0; j < active.size(); ++j) {
        const auto t = static_cast<Task>(active[j]);
        const auto ti = active[j];
        up.outputs[ti] = task_output_grad(
            out, t, ti < kNumRegressionTasks ? s.targets[ti] : Grid4{}, s.onehot,
            s.masks, s.valid, mtl.d_task[j]);
        up.log_sigma[ti] = static_cast<float>(mtl.d_log_sigma[j]);
      }
      model::backward(ck.params, cache, up, grads);
      adam_step(ck.params.tensors(), std::as_const(grads).tensors(), ck.optimizer,
                config.learning_rate, {}, names);

      for (std::size_t t : active) loss_sum[t] += l[t];
      objective_sum += mtl.value;
    }
    ck.epochs_done = static_cast<std::uint32_t>(epoch);
    res.log.records.push_back(finish_epoch(Stage::kPretrain, epoch, ck.optimizer.step,
                                           loss_sum, objective_sum, data.train.size(),
                                           ck.params, data, config, start));
    if (on_epoch) on_epoch(res.log.records.back());
  }
  return res;
}

StageResult finetune_stage(const Checkpoint& pretrained, const TrainingData& data,
                           const TrainConfig& config, const EpochCallback& on_epoch) {
  check_data(data, config);
  const auto expected = config_hash(pretrained.params.config, data.scale, data.norm);
  if (pretrained.config_hash != expected) {
    throw ConfigMismatchError(
        "fine-tune checkpoint was produced for a different architecture, scale or "
        "normalization");
  }
  StageResult res;
  Checkpoint& ck = res.checkpoint;
  ck.params = pretrained.params;
  ck.optimizer = AdamState::zeros(tensor_sizes(ck.params));
  ck.config_hash = expected;
  ck.scale = data.scale;
  ck.stage = Stage::kFinetune;

  const auto active = active_indices(config.tasks);
  std::vector<std::size_t> head_tensors;
  for (std::size_t t : active) {
    const auto [first, last] = ck.params.head_tensor_range(static_cast<Task>(t));
    for (std::size_t k = first; k < last; ++k) head_tensors.push_back(k);
  }
  const auto names = model::tensor_names(ck.params.config);

  // The backbone is frozen, so its output per sample is fixed for the stage.
  std::vector<Grid4> features;
  features.reserve(data.train.size());
  for (const auto& s : data.train) {
    features.push_back(model::forward_backbone(ck.params, s.input));
  }

  auto grads = model::ModelParams::zeros(ck.params.config);
  const model::BackwardOptions head_only{.backbone = false};
  const auto start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= config.epochs_finetune; ++epoch) {
    std::array<double, kNumTasks> loss_sum{};
    double objective_sum = 0.0;
    for (std::size_t i : epoch_order(data.train.size(), config.shuffle_seed,
                                     Stage::kFinetune, epoch)) {
      const PreparedSample& s = data.train[i];
      model::ForwardCache<float> cache;
      const auto out = model::forward_heads(ck.params, features[i], &cache);
      const auto l = task_losses(out, s);
      for (std::size_t t : active) {
        if (!std::isfinite(l[t])) {
          throw NonFiniteError("non-finite " +
                               std::string(model::task_name(static_cast<Task>(t))) +
                               " loss during fine-tune");
        }
      }

      model::TaskGradients<float> up;
      for (std::size_t t : active) {
        up.outputs[t] = task_output_grad(
            out, static_cast<Task>(t), t < kNumRegressionTasks ? s.targets[t] : Grid4{},
            s.onehot, s.masks, s.valid, 1.0);
        loss_sum[t] += l[t];
        objective_sum += l[t];
      }
      model::backward(ck.params, cache, up, grads, head_only);
      adam_step(ck.params.tensors(), std::as_const(grads).tensors(), ck.optimizer,
                config.learning_rate, head_tensors, names);
    }
    ck.epochs_done = static_cast<std::uint32_t>(epoch);
    res.log.records.push_back(finish_epoch(Stage::kFinetune, epoch, ck.optimizer.step,
                                           loss_sum, objective_sum, data.train.size(),
                                           ck.params, data, config, start));
    if (on_epoch) on_epoch(res.log.records.back());
  }
  return res;
}

TwoStageResult train_two_stage(const model::ArchConfig& arch, const TrainingData& data,
                               const TrainConfig& config, const EpochCallback& on_epoch) {
  arch.validate();
  auto pre = pretrain_stage(model::build_model<float>(arch, config.init_seed), data,
                            config, on_epoch);
  auto fine = finetune_stage(pre.checkpoint, data, config, on_epoch);
  TwoStageResult r;
  r.pretrained = std::move(pre.checkpoint);
  r.finetuned = std::move(fine.checkpoint);
  r.log.records = std::move(pre.log.records);
  r.log.records.insert(r.log.records.end(), fine.log.records.begin(),
                       fine.log.records.end());
  return r;
}

std::uint64_t backbone_digest(const model::ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto tensors = params.tensors();
  for (std::size_t t = 0; t < params.backbone_tensor_count(); ++t) {
    for (float f : tensors[t]) {
      unsigned char b[sizeof f];
      std::memcpy(b, &f, sizeof f);
      for (unsigned char c : b) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

diff::GradCheckResult model_grad_check(std::uint64_t seed, const model::ArchConfig& arch,
                                       int h, int w, double eps) {
  using G = Grid4d;
  Rng rng(seed);
  auto params = model::build_model<double>(arch, hash_combine(seed, 1));
  for (auto& s : params.log_sigma) s = rng.uniform(-0.5, 0.5);
  for (auto& b : params.blocks) {
    for (auto& v : b.conv1.bias) v = rng.uniform(-0.1, 0.1);
    for (auto& v : b.conv2.bias) v = rng.uniform(-0.1, 0.1);
  }
  for (auto& hd : params.heads) {
    for (auto& v : hd.conv1.bias) v = rng.uniform(-0.1, 0.1);
    for (auto& v : hd.conv2.bias) v = rng.uniform(-0.1, 0.1);
  }

  G input(1, arch.in_channels, h, w);
  for (auto& v : input.values()) v = rng.uniform();
  std::array<G, kNumRegressionTasks> targets;
  for (auto& t : targets) {
    t = G(1, 1, h, w);
    for (auto& v : t.values()) v = rng.uniform();
  }
  Grid4 codes(1, 1, h, w);
  for (auto& v : codes.values()) {
    const double u = rng.uniform();
    v = u < 0.2 ? kLosCodeInBuilding : (u < 0.6 ? kLosCodeLos : kLosCodeNlos);
  }
  const G onehot = loss::one_hot_classes(codes).cast<double>();
  const auto masks = loss::build_masks(codes, 2);
  const auto n = loss::valid_count(masks);

  auto objective = [&](const model::BasicModelParams<double>& p,
                       model::ForwardCache<double>* cache,
                       model::BasicModelOutput<double>* out_copy) {
    auto out = model::forward(p, input, cache);
    std::array<double, kNumTasks> l{};
    for (int t = 0; t < kNumRegressionTasks; ++t) {
      l[static_cast<std::size_t>(t)] = loss::l1_task_loss(
          out.regression[static_cast<std::size_t>(t)], targets[static_cast<std::size_t>(t)],
          masks, n);
    }
    l[kNumTasks - 1] = loss::ce_task_loss(out.probs, onehot, masks, n);
    std::vector<double> s(p.log_sigma.begin(), p.log_sigma.end());
    auto mtl = loss::mtl_loss(l, s);
    if (out_copy) *out_copy = std::move(out);
    return mtl;
  };

  model::ForwardCache<double> cache;
  model::BasicModelOutput<double> out;
  const auto mtl = objective(params, &cache, &out);
  model::TaskGradients<double> up;
  up.has_log_sigma = true;
  for (Task t : model::kAllTasks) {
    const auto ti = static_cast<std::size_t>(model::idx(t));
    up.outputs[ti] = task_output_grad(out, t, ti < kNumRegressionTasks ? targets[ti] : G{},
                                      onehot, masks, n, mtl.d_task[ti]);
    up.log_sigma[ti] = mtl.d_log_sigma[ti];
  }
  auto grads = model::BasicModelParams<double>::zeros(arch);
  model::backward(params, cache, up, grads);

  const auto names = model::tensor_names(arch);
  diff::GradCheckResult result;
  auto ptensors = params.tensors();
  const auto gtensors = std::as_const(grads).tensors();
  for (std::size_t t = 0; t < ptensors.size(); ++t) {
    for (std::size_t i = 0; i < ptensors[t].size(); ++i) {
      const double orig = ptensors[t][i];
      ptensors[t][i] = orig + eps;
      const double fp = objective(params, nullptr, nullptr).value;
      ptensors[t][i] = orig - eps;
      const double fm = objective(params, nullptr, nullptr).value;
      ptensors[t][i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = diff::relative_error(gtensors[t][i], numeric);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = names[t];
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace chansr::train
