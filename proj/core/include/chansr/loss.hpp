// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

#include "chansr/channel_map.hpp"
#include "chansr/grid.hpp"

namespace chansr::loss {

/// Weight given to in-building cells and to decimation anchors.
inline constexpr float kMaskLow = 0.01f;

/// Per-cell loss weights, each an (1,1,H,W) plane with entries in
/// {0.01, 1.0}.
struct MaskPair {
  Grid4 m_na;  // 0.01 where the receiver is inside a building
  Grid4 m_gt;  // 0.01 on the anchors (i*s, j*s) that survive degradation

  /// m_na * m_gt.
  Grid4 combined() const;
  int h() const { return m_na.h(); }
  int w() const { return m_na.w(); }
};

/// In-building cells are read from the LOS-code channel (code 1).
MaskPair build_masks(const ChannelMap& hr, int s);
MaskPair build_masks(const Grid4& los_code_plane, int s);

/// grid * m_na * m_gt, broadcast over N and C.
template <typename T>
BasicGrid<T> apply_weights(const BasicGrid<T>& grid, const MaskPair& masks);

/// Cells that are neither in-building nor anchors.
std::size_t valid_count(const MaskPair& masks);

/// n / (h*w)^2 normalisation shared by both task losses.
double loss_coefficient(std::size_t n, int h, int w);

/// (n/(hw)^2) * sum |w*pred - w*target|. Throws InvalidArgument for n = 0.
template <typename T>
T l1_task_loss(const BasicGrid<T>& pred, const BasicGrid<T>& target,
               const MaskPair& masks, std::size_t n);
template <typename T>
BasicGrid<T> l1_task_loss_grad(const BasicGrid<T>& pred, const BasicGrid<T>& target,
                               const MaskPair& masks, std::size_t n);

inline constexpr double kProbFloor = 1e-12;

/// -(n/(hw)^2) * sum (w*onehot) * log(max(prob, 1e-12)). The one-hot
/// target is weighted; the log-probabilities are not.
template <typename T>
T ce_task_loss(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
               const MaskPair& masks, std::size_t n);
template <typename T>
BasicGrid<T> ce_task_loss_grad(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
                               const MaskPair& masks, std::size_t n);

/// (1,3,H,W) one-hot over {LOS, NLOS, in-building} from the LOS-code
/// channel of `map`.
Grid4 one_hot_classes(const ChannelMap& map);
Grid4 one_hot_classes(const Grid4& los_code_plane);

/// Uncertainty-weighted combination and its analytic gradients.
struct MtlLoss {
  double value = 0.0;
  std::vector<double> d_task;       // dL/dL_m = 1 / (2 sigma_m^2)
  std::vector<double> d_log_sigma;  // dL/ds_m = 1 - L_m / sigma_m^2
};

/// sum_m L_m / (2 sigma_m^2) + sum_m log sigma_m with sigma_m = exp(s_m).
MtlLoss mtl_loss(std::span<const double> task_losses,
                 std::span<const double> log_sigmas);

}  // namespace chansr::loss
