// SPDX-License-Identifier: Apache-2.0
#include <map>

#include <benchmark/benchmark.h>

#include "chansr/dataset.hpp"
#include "chansr/loss.hpp"
#include "chansr/model.hpp"
#include "chansr/ops.hpp"
#include "chansr/random.hpp"
#include "chansr/scene.hpp"
#include "chansr/train.hpp"

using namespace chansr;

namespace {

Grid4 random_grid(Shape4 s, std::uint64_t seed) {
  Rng rng(seed);
  Grid4 g(s);
  for (auto& v : g.values()) v = static_cast<float>(rng.uniform());
  return g;
}

const ChannelMap& sample_map(int grid) {
  static std::map<int, ChannelMap> cache;
  auto it = cache.find(grid);
  if (it == cache.end()) {
    const auto sc = scene::generate_scene(3, grid, grid);
    it = cache.emplace(grid, scene::render_maps(sc, 5)).first;
  }
  return it->second;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const auto params = model::build_model<float>({}, 1);
  const auto& k = params.blocks[0].conv1;
  const auto x = random_grid({1, 7, hw, hw}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(diff::conv2d_forward(x, k));
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(64);

void BM_Conv2dBackward(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const auto params = model::build_model<float>({}, 1);
  const auto& k = params.blocks[0].conv1;
  const auto x = random_grid({1, 7, hw, hw}, 2);
  const auto go = random_grid({1, 8, hw, hw}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(diff::conv2d_backward(x, k, go));
  state.SetItemsProcessed(state.iterations() * hw * hw);
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(64);

void BM_ModelForward(benchmark::State& state) {
  const auto params = model::build_model<float>({}, 1);
  const auto x = random_grid({1, 7, 64, 64}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(params, x));
}
BENCHMARK(BM_ModelForward);

// One batch-1 pre-training step: forward, losses, backward, Adam.
void BM_PretrainStep(benchmark::State& state) {
  const auto& hr = sample_map(64);
  const auto norm = dataset::Normalization::defaults();
  train::TrainingData data;
  data.scale = 2;
  data.norm = norm;
  data.train.push_back(train::prepare_sample(hr, 2, norm));
  train::TrainConfig cfg;
  cfg.epochs_pretrain = 1;
  cfg.eval_every_epoch = false;
  const auto init = model::build_model<float>({}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train::pretrain_stage(init, data, cfg));
  }
}
BENCHMARK(BM_PretrainStep)->Unit(benchmark::kMillisecond);

void BM_Degrade(benchmark::State& state) {
  const auto& hr = sample_map(64);
  const int s = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dataset::degrade(hr, s));
}
BENCHMARK(BM_Degrade)->Arg(2)->Arg(8);

void BM_RenderMaps(benchmark::State& state) {
  const int grid = static_cast<int>(state.range(0));
  const auto sc = scene::generate_scene(3, grid, grid);
  for (auto _ : state) benchmark::DoNotOptimize(scene::render_maps(sc, 5));
  state.SetItemsProcessed(state.iterations() * grid * grid);
}
BENCHMARK(BM_RenderMaps)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GenerateScene(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(scene::generate_scene(seed++, 64, 64));
}
BENCHMARK(BM_GenerateScene);

}  // namespace

BENCHMARK_MAIN();
