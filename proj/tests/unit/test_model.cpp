// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "chansr/error.hpp"
#include "chansr/model.hpp"
#include "chansr/train.hpp"
#include "test_util.hpp"

using namespace chansr;
using namespace chansr::model;

namespace {

// Hand-expanded count for the default schedule: 3 blocks of 7->8->7 convs
// and six 7->4->out heads, all 3x3 with bias.
constexpr std::size_t kBlock = (7 * 8 * 9 + 8) + (8 * 7 * 9 + 7);  // 1023
constexpr std::size_t kRegHead = (7 * 4 * 9 + 4) + (4 * 1 * 9 + 1);  // 293
constexpr std::size_t kLosHead = (7 * 4 * 9 + 4) + (4 * 3 * 9 + 3);  // 367
constexpr std::size_t kDefaultCount = 3 * kBlock + 5 * kRegHead + kLosHead;

std::size_t span_total(const ModelParams& p) {
  std::size_t n = 0;
  for (auto t : p.tensors()) n += t.size();
  return n;
}

}  // namespace

TEST(ParamCount, DefaultScheduleMatchesHandCount) {
  static_assert(kDefaultCount == 4901);
  const ArchConfig arch;
  EXPECT_EQ(closed_form_param_count(arch, false), kDefaultCount);
  EXPECT_EQ(closed_form_param_count(arch, true), kDefaultCount + 6);
  const auto p = build_model<float>(arch, 1);
  EXPECT_EQ(count_params(p), kDefaultCount + 6);
  EXPECT_EQ(span_total(p), kDefaultCount + 6);
}

TEST(ParamCount, SingleBlockAndWiderMid) {
  ArchConfig one;
  one.n_blocks = 1;
  EXPECT_EQ(closed_form_param_count(one, false), kBlock + 5 * kRegHead + kLosHead);
  EXPECT_EQ(count_params(build_model<float>(one, 1)), closed_form_param_count(one));

  // Doubling block_mid doubles the block weights and mid bias.
  ArchConfig wide;
  wide.block_mid = 16;
  const std::size_t wide_block = (7 * 16 * 9 + 16) + (16 * 7 * 9 + 7);
  EXPECT_EQ(closed_form_param_count(wide, false), 3 * wide_block + 5 * kRegHead + kLosHead);
  EXPECT_EQ(count_params(build_model<float>(wide, 1)), closed_form_param_count(wide));
}

TEST(ParamCount, FlatScheduleUsesInputWidth) {
  const auto flat = flat_config();
  EXPECT_EQ(flat.block_mid, 7);
  EXPECT_FALSE(flat.residual);
  const std::size_t flat_block = 2 * (7 * 7 * 9 + 7);
  EXPECT_EQ(closed_form_param_count(flat, false), 3 * flat_block + 5 * kRegHead + kLosHead);
}

TEST(ParamCount, RejectsDegenerateSchedules) {
  ArchConfig a;
  a.n_blocks = 0;
  EXPECT_THROW(a.validate(), InvalidArgument);
  EXPECT_THROW(build_model<float>(a, 1), InvalidArgument);
  ArchConfig b;
  b.block_mid = 3;
  EXPECT_THROW(b.validate(), InvalidArgument);
  ArchConfig c;
  c.head_out[5] = 2;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(ParamLayout, NamesParallelTensors) {
  const ArchConfig arch;
  const auto p = build_model<float>(arch, 1);
  const auto names = tensor_names(arch);
  ASSERT_EQ(names.size(), p.tensors().size());
  EXPECT_EQ(names.front(), "block0.conv1.weight");
  EXPECT_EQ(names.back(), "log_sigma");
  EXPECT_EQ(p.backbone_tensor_count(), 12u);
  const auto [first, last] = p.head_tensor_range(Task::kLos);
  EXPECT_EQ(last - first, 4u);
  EXPECT_NE(names[first].find("LOS"), std::string::npos);
}

TEST(Init, DeterministicPerSeedAndBounded) {
  const ArchConfig arch;
  const auto a = build_model<float>(arch, 3);
  EXPECT_EQ(a, build_model<float>(arch, 3));
  EXPECT_NE(a, build_model<float>(arch, 4));
  for (float s : a.log_sigma) EXPECT_EQ(s, 0.0f);
  const float bound = std::sqrt(6.0f / (7 * 9));
  for (float v : a.blocks[0].conv1.weights.values()) EXPECT_LE(std::abs(v), bound);
  for (float v : a.blocks[0].conv1.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, ShapesPreserved) {
  const auto p = build_model<float>(ArchConfig{}, 1);
  const auto x = fixtures::random_grid({1, 7, 12, 20}, 2, -1, 1);
  const auto out = forward(p, x);
  for (const auto& r : out.regression) {
    EXPECT_EQ(r.shape(), (Shape4{1, 1, 12, 20}));
  }
  EXPECT_EQ(out.probs.shape(), (Shape4{1, 3, 12, 20}));
}

TEST(Forward, WrongChannelCountThrows) {
  const auto p = build_model<float>(ArchConfig{}, 1);
  EXPECT_THROW(forward(p, Grid4(1, 6, 8, 8)), ShapeError);
}

TEST(Forward, NonFiniteInputThrows) {
  const auto p = build_model<float>(ArchConfig{}, 1);
  Grid4 x(1, 7, 8, 8);
  x(0, 0, 4, 4) = std::nanf("");
  EXPECT_THROW(forward(p, x), NonFiniteError);
}

TEST(Forward, ZeroParamsGiveUniformClassesAndZeroRegression) {
  const auto p = ModelParams::zeros(ArchConfig{});
  const auto out = forward(p, fixtures::random_grid({1, 7, 6, 6}, 1, -1, 1));
  for (float v : out.probs.values()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-7);
  for (const auto& r : out.regression)
    for (float v : r.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, ResidualBlocksWithZeroWeightsAreIdentity) {
  const auto x = fixtures::random_grid({1, 7, 6, 6}, 5, -1, 1);
  const auto res = ModelParams::zeros(ArchConfig{});
  EXPECT_EQ(forward_backbone(res, x), x);
  const auto flat = ModelParams::zeros(flat_config());
  const auto y = forward_backbone(flat, x);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, DeterministicAndBatchIndependent) {
  const auto p = build_model<float>(ArchConfig{}, 9);
  const auto x = fixtures::random_grid({1, 7, 8, 8}, 3, -1, 1);
  const auto a = forward(p, x);
  const auto b = forward(p, x);
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.regression[0], b.regression[0]);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto p = build_model<double>(ArchConfig{}, 2);
  ForwardCache<double> cache;
  forward(p, fixtures::random_grid_d({1, 7, 6, 6}, 4), &cache);
  TaskGradients<double> up;
  for (Task t : kAllTasks) up.outputs[static_cast<std::size_t>(idx(t))] = BasicGrid<double>(
      t == Task::kLos ? Shape4{1, 3, 6, 6} : Shape4{1, 1, 6, 6});
  auto g = BasicModelParams<double>::zeros(ArchConfig{});
  for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 5.0);
  backward(p, cache, up, g);
  const auto names = tensor_names(ArchConfig{});
  const auto tensors = g.tensors();
  for (std::size_t i = 0; i + 1 < tensors.size(); ++i) {
    for (double v : tensors[i]) EXPECT_EQ(v, 0.0) << names[i];
  }
}

TEST(Backward, FrozenBackboneLeavesBackboneBuffersUntouched) {
  const auto p = build_model<double>(ArchConfig{}, 2);
  ForwardCache<double> cache;
  forward(p, fixtures::random_grid_d({1, 7, 6, 6}, 4), &cache);
  TaskGradients<double> up;
  up.outputs[0] = fixtures::random_grid_d({1, 1, 6, 6}, 8);
  auto g = BasicModelParams<double>::zeros(ArchConfig{});
  for (auto t : g.tensors()) std::fill(t.begin(), t.end(), 42.0);
  backward(p, cache, up, g, BackwardOptions{.backbone = false});
  const auto tensors = g.tensors();
  for (std::size_t i = 0; i < g.backbone_tensor_count(); ++i) {
    for (double v : tensors[i]) EXPECT_EQ(v, 42.0);
  }
  // The PL head received a real gradient.
  const auto [first, last] = g.head_tensor_range(Task::kPathLoss);
  bool changed = false;
  for (std::size_t i = first; i < last; ++i)
    for (double v : tensors[i]) changed |= v != 42.0;
  EXPECT_TRUE(changed);
}

TEST(Backward, MissingCacheThrows) {
  const auto p = build_model<double>(ArchConfig{}, 2);
  ForwardCache<double> cache;
  auto g = BasicModelParams<double>::zeros(ArchConfig{});
  EXPECT_THROW(backward(p, cache, TaskGradients<double>{}, g), Error);
}

TEST(Backward, WholeModelFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = train::model_grad_check(seed);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst_input << "[" << r.worst_index << "]";
  }
  ArchConfig flat = flat_config();
  flat.n_blocks = 1;
  EXPECT_LT(train::model_grad_check(5, flat, 6, 6).max_rel_error, 1e-3);
}
