// SPDX-License-Identifier: Apache-2.0
#include "chansr/loss.hpp"

#include <cmath>

#include "chansr/error.hpp"
#include "chansr/ops.hpp"

namespace chansr::loss {

Grid4 MaskPair::combined() const {
  require_same_shape(m_na.shape(), m_gt.shape(), "mask pair");
  Grid4 out(m_na.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = m_na.data()[i] * m_gt.data()[i];
  }
  return out;
}

MaskPair build_masks(const Grid4& codes, int s) {
  if (s <= 0) throw InvalidArgument("mask scale must be positive");
  if (codes.n() != 1 || codes.c() != 1) {
    throw ShapeError("build_masks expects an (1,1,H,W) LOS-code plane, got " +
                     codes.shape().str());
  }
  MaskPair m{Grid4(codes.shape(), 1.0f), Grid4(codes.shape(), 1.0f)};
  for (int y = 0; y < codes.h(); ++y) {
    for (int x = 0; x < codes.w(); ++x) {
      if (codes(0, 0, y, x) == kLosCodeInBuilding) m.m_na(0, 0, y, x) = kMaskLow;
      if (y % s == 0 && x % s == 0) m.m_gt(0, 0, y, x) = kMaskLow;
    }
  }
  return m;
}

MaskPair build_masks(const ChannelMap& hr, int s) {
  Grid4 codes(1, 1, hr.h(), hr.w());
  const auto src = hr.data.plane(0, ch(Channel::kLosCode));
  std::copy(src.begin(), src.end(), codes.data());
  return build_masks(codes, s);
}

template <typename T>
BasicGrid<T> apply_weights(const BasicGrid<T>& grid, const MaskPair& masks) {
  if (grid.h() != masks.h() || grid.w() != masks.w()) {
    throw ShapeError("apply_weights: grid " + grid.shape().str() +
                     " vs mask " + masks.m_na.shape().str());
  }
  BasicGrid<T> out(grid.shape());
  for (int n = 0; n < grid.n(); ++n) {
    for (int c = 0; c < grid.c(); ++c) {
      const auto src = grid.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] * static_cast<T>(masks.m_na.data()[i]) *
                 static_cast<T>(masks.m_gt.data()[i]);
      }
    }
  }
  return out;
}

std::size_t valid_count(const MaskPair& masks) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < masks.m_na.size(); ++i) {
    if (masks.m_na.data()[i] == 1.0f && masks.m_gt.data()[i] == 1.0f) ++n;
  }
  return n;
}

double loss_coefficient(std::size_t n, int h, int w) {
  if (n == 0) throw InvalidArgument("task loss undefined: no cell left to estimate (n = 0)");
  const double hw = static_cast<double>(h) * static_cast<double>(w);
  return static_cast<double>(n) / (hw * hw);
}

namespace {

template <typename T>
BasicGrid<T> weight_plane(const MaskPair& masks) {
  return masks.combined().cast<T>();
}

}  // namespace

template <typename T>
T l1_task_loss(const BasicGrid<T>& pred, const BasicGrid<T>& target,
               const MaskPair& masks, std::size_t n) {
  const double coef = loss_coefficient(n, pred.h(), pred.w());
  return diff::masked_l1(pred, target, weight_plane<T>(masks), coef);
}

template <typename T>
BasicGrid<T> l1_task_loss_grad(const BasicGrid<T>& pred, const BasicGrid<T>& target,
                               const MaskPair& masks, std::size_t n) {
  const double coef = loss_coefficient(n, pred.h(), pred.w());
  return diff::masked_l1_backward(pred, target, weight_plane<T>(masks), coef);
}

template <typename T>
T ce_task_loss(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
               const MaskPair& masks, std::size_t n) {
  const double coef = loss_coefficient(n, probs.h(), probs.w());
  return diff::masked_ce(probs, onehot, weight_plane<T>(masks), coef, kProbFloor);
}

template <typename T>
BasicGrid<T> ce_task_loss_grad(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
                               const MaskPair& masks, std::size_t n) {
  const double coef = loss_coefficient(n, probs.h(), probs.w());
  return diff::masked_ce_backward(probs, onehot, weight_plane<T>(masks), coef, kProbFloor);
}

Grid4 one_hot_classes(const Grid4& codes) {
  if (codes.c() != 1) throw ShapeError("one_hot_classes expects one code channel");
  Grid4 out(codes.n(), 3, codes.h(), codes.w());
  for (int n = 0; n < codes.n(); ++n) {
    const auto src = codes.plane(n, 0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const int k = static_cast<int>(los_state_from_code(src[i]));
      out.plane(n, k)[i] = 1.0f;
    }
  }
  return out;
}

Grid4 one_hot_classes(const ChannelMap& map) {
  Grid4 codes(1, 1, map.h(), map.w());
  const auto src = map.data.plane(0, ch(Channel::kLosCode));
  std::copy(src.begin(), src.end(), codes.data());
  return one_hot_classes(codes);
}

MtlLoss mtl_loss(std::span<const double> task_losses,
                 std::span<const double> log_sigmas) {
  if (task_losses.size() != log_sigmas.size()) {
    throw InvalidArgument("mtl_loss: task and log-sigma counts differ");
  }
  MtlLoss out;
  out.d_task.resize(task_losses.size());
  out.d_log_sigma.resize(task_losses.size());
  for (std::size_t m = 0; m < task_losses.size(); ++m) {
    const double inv_var = std::exp(-2.0 * log_sigmas[m]);
    out.value += 0.5 * task_losses[m] * inv_var + log_sigmas[m];
    out.d_task[m] = 0.5 * inv_var;
    out.d_log_sigma[m] = 1.0 - task_losses[m] * inv_var;
  }
  if (!std::isfinite(out.value)) throw NonFiniteError("mtl_loss is not finite");
  return out;
}

#define CHANSR_INSTANTIATE_LOSS(T)                                                   \
  template BasicGrid<T> apply_weights(const BasicGrid<T>&, const MaskPair&);         \
  template T l1_task_loss(const BasicGrid<T>&, const BasicGrid<T>&, const MaskPair&, \
                          std::size_t);                                              \
  template BasicGrid<T> l1_task_loss_grad(const BasicGrid<T>&, const BasicGrid<T>&,  \
                                          const MaskPair&, std::size_t);             \
  template T ce_task_loss(const BasicGrid<T>&, const BasicGrid<T>&, const MaskPair&, \
                          std::size_t);                                              \
  template BasicGrid<T> ce_task_loss_grad(const BasicGrid<T>&, const BasicGrid<T>&,  \
                                          const MaskPair&, std::size_t);

CHANSR_INSTANTIATE_LOSS(float)
CHANSR_INSTANTIATE_LOSS(double)

#undef CHANSR_INSTANTIATE_LOSS

}  // namespace chansr::loss
