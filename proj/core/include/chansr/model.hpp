// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chansr/channels.hpp"
#include "chansr/grid.hpp"
#include "chansr/ops.hpp"

namespace chansr::model {

/// Super-resolution targets, in report order.
enum class Task : int {
  kPathLoss = 0,
  kPowerRatio,
  kDelaySpread,
  kAzimuthSpread,
  kElevationSpread,
  kLos,
};
inline constexpr int kNumTasks = 6;
inline constexpr int kNumRegressionTasks = 5;
inline constexpr int kNumClasses = 3;  // LOS, NLOS, in-building

inline constexpr std::array<Task, kNumTasks> kAllTasks = {
    Task::kPathLoss,      Task::kPowerRatio,       Task::kDelaySpread,
    Task::kAzimuthSpread, Task::kElevationSpread,  Task::kLos};

inline constexpr int idx(Task t) { return static_cast<int>(t); }
std::string_view task_name(Task t);
/// Map channel holding the ground truth of a task.
Channel target_channel(Task t);

/// Backbone of `n_blocks` conv-ReLU-conv blocks (in -> mid -> in channels)
/// feeding six two-layer heads (in -> head_mid -> out).
struct ArchConfig {
  int n_blocks = 3;
  int in_channels = kNumChannels;
  int block_mid = 8;
  int head_mid = 4;
  bool residual = true;
  std::array<int, kNumTasks> head_out{1, 1, 1, 1, 1, kNumClasses};

  /// Throws InvalidArgument for schedules the model cannot run.
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

/// Plain block schedule (in -> in -> in) without skip connections.
ArchConfig flat_config(ArchConfig base = {});

/// Trainable scalars implied by the schedule, optionally with the six
/// per-task log-noise parameters.
std::size_t closed_form_param_count(const ArchConfig& config,
                                    bool include_log_sigma = true);

template <typename T>
struct BasicModelParams {
  struct Block {
    diff::ConvKernel<T> conv1;
    diff::ConvKernel<T> conv2;
    bool operator==(const Block&) const = default;
  };
  struct Head {
    diff::ConvKernel<T> conv1;
    diff::ConvKernel<T> conv2;
    bool operator==(const Head&) const = default;
  };

  ArchConfig config;
  std::vector<Block> blocks;
  std::array<Head, kNumTasks> heads;
  /// s_m = log(sigma_m) of the uncertainty-weighted loss.
  std::array<T, kNumTasks> log_sigma{};

  /// All-zero parameters with the shapes of `config`.
  static BasicModelParams zeros(const ArchConfig& config);

  /// Canonical order: blocks (conv1 w, b, conv2 w, b), heads in task
  /// order (same layout), then the six log-sigmas.
  std::vector<std::span<T>> tensors();
  std::vector<std::span<const T>> tensors() const;
  /// Number of leading entries of tensors() that belong to the backbone.
  std::size_t backbone_tensor_count() const { return blocks.size() * 4; }
  /// Tensor range [first, last) belonging to head `t`.
  std::pair<std::size_t, std::size_t> head_tensor_range(Task t) const;
  std::size_t log_sigma_tensor_index() const {
    return backbone_tensor_count() + kNumTasks * 4;
  }
  std::size_t count() const;

  template <typename U>
  BasicModelParams<U> cast() const;

  bool operator==(const BasicModelParams&) const = default;
};

using ModelParams = BasicModelParams<float>;

/// Human-readable names parallel to tensors(), e.g. "block1.conv2.bias",
/// "head.DS.conv1.weight", "log_sigma".
std::vector<std::string> tensor_names(const ArchConfig& config);

/// Uniform fan-in initialisation (bound sqrt(6 / fan_in)), zero biases,
/// log-sigmas at 0. Deterministic per seed.
template <typename T>
BasicModelParams<T> build_model(const ArchConfig& config, std::uint64_t seed);

/// Head outputs in normalized units: five (N,1,H,W) regression maps and
/// (N,3,H,W) class probabilities.
template <typename T>
struct BasicModelOutput {
  std::array<BasicGrid<T>, kNumRegressionTasks> regression;
  BasicGrid<T> probs;

  const BasicGrid<T>& task(Task t) const {
    return t == Task::kLos ? probs : regression[static_cast<std::size_t>(idx(t))];
  }
};
using ModelOutput = BasicModelOutput<float>;

/// Activations kept by forward for the backward pass.
template <typename T>
struct ForwardCache {
  struct BlockCache {
    BasicGrid<T> x;
    BasicGrid<T> z1;
  };
  struct HeadCache {
    BasicGrid<T> z1;
  };
  std::vector<BlockCache> blocks;
  BasicGrid<T> features;
  std::array<HeadCache, kNumTasks> heads;
  BasicModelOutput<T> output;
  bool has_backbone = false;
  bool has_heads = false;
};

template <typename T>
BasicGrid<T> forward_backbone(const BasicModelParams<T>& params,
                              const BasicGrid<T>& input,
                              ForwardCache<T>* cache = nullptr);

template <typename T>
BasicModelOutput<T> forward_heads(const BasicModelParams<T>& params,
                                  const BasicGrid<T>& features,
                                  ForwardCache<T>* cache = nullptr);

/// Full pass. Throws ShapeError for a wrong channel count and
/// NonFiniteError if any activation is not finite.
template <typename T>
BasicModelOutput<T> forward(const BasicModelParams<T>& params,
                            const BasicGrid<T>& input,
                            ForwardCache<T>* cache = nullptr);

/// Loss gradients w.r.t. each head output (probabilities for the LOS head).
/// An empty grid means the task contributes nothing.
template <typename T>
struct TaskGradients {
  std::array<BasicGrid<T>, kNumTasks> outputs;
  /// dL/ds_m, copied into the parameter gradients when present.
  std::array<T, kNumTasks> log_sigma{};
  bool has_log_sigma = false;
};

struct BackwardOptions {
  /// When false the backbone gradient tensors are not written at all.
  bool backbone = true;
};

/// Writes parameter gradients into `grads` (same config as `params`).
/// Head tensors of every task are overwritten; backbone tensors only when
/// `opts.backbone`. Throws Error when the cache lacks the needed
/// activations.
template <typename T>
void backward(const BasicModelParams<T>& params, const ForwardCache<T>& cache,
              const TaskGradients<T>& upstream, BasicModelParams<T>& grads,
              const BackwardOptions& opts = {});

/// Exact count of scalar trainables, including the log-sigmas.
template <typename T>
std::size_t count_params(const BasicModelParams<T>& params) {
  return params.count();
}

}  // namespace chansr::model
