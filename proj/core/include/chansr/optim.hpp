// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chansr::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// First/second moment estimates, one vector per parameter tensor.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  /// Zero moments matching the tensor sizes.
  static AdamState zeros(std::span<const std::size_t> sizes, AdamConfig config = {});
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step. Only tensors listed in `selected` are
/// touched (all when empty); the step counter advances once per call.
/// Gradients are checked first: a non-finite entry throws NonFiniteError
/// naming the tensor, and nothing is updated.
void adam_step(std::vector<std::span<float>> params,
               std::vector<std::span<const float>> grads, AdamState& state,
               double lr, std::span<const std::size_t> selected = {},
               std::span<const std::string> names = {});

}  // namespace chansr::train
