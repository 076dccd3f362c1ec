// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "chansr/grid.hpp"

/// Forward and analytic backward passes for the layers the model needs.
/// Every function is instantiated for float (training) and double
/// (finite-difference checking).
namespace chansr::diff {

/// Square kernel, stride 1, zero "same" padding. weights: (C_out, C_in, k, k).
template <typename T>
struct ConvKernel {
  BasicGrid<T> weights;
  std::vector<T> bias;

  ConvKernel() = default;
  ConvKernel(int c_out, int c_in, int k = 3)
      : weights(c_out, c_in, k, k), bias(static_cast<std::size_t>(c_out), T{}) {}

  int c_out() const { return weights.n(); }
  int c_in() const { return weights.c(); }
  int k() const { return weights.h(); }
  std::size_t param_count() const { return weights.size() + bias.size(); }

  bool operator==(const ConvKernel&) const = default;
};

template <typename T>
struct ConvGrads {
  BasicGrid<T> input;  // empty when not requested
  BasicGrid<T> weights;
  std::vector<T> bias;
};

template <typename T>
BasicGrid<T> conv2d_forward(const BasicGrid<T>& input, const ConvKernel<T>& kernel);

template <typename T>
ConvGrads<T> conv2d_backward(const BasicGrid<T>& input,
                             const ConvKernel<T>& kernel,
                             const BasicGrid<T>& grad_out,
                             bool want_input_grad = true);

template <typename T>
BasicGrid<T> relu_forward(const BasicGrid<T>& x);
template <typename T>
BasicGrid<T> relu_backward(const BasicGrid<T>& x, const BasicGrid<T>& grad_out);

/// Softmax across the channel axis, independently at each (n, y, x).
template <typename T>
BasicGrid<T> softmax_channels(const BasicGrid<T>& logits);
template <typename T>
BasicGrid<T> softmax_channels_backward(const BasicGrid<T>& probs,
                                       const BasicGrid<T>& grad_out);

template <typename T>
BasicGrid<T> add(const BasicGrid<T>& a, const BasicGrid<T>& b);
/// d(a+b): the upstream gradient flows unchanged to both operands.
template <typename T>
void add_backward(const BasicGrid<T>& grad_out, BasicGrid<T>& grad_a,
                  BasicGrid<T>& grad_b);

/// a * x + b, elementwise.
template <typename T>
BasicGrid<T> scale_affine(const BasicGrid<T>& x, T a, T b);
template <typename T>
BasicGrid<T> scale_affine_backward(const BasicGrid<T>& grad_out, T a);

/// coef * sum |w * pred - w * target| with w an (1,1,H,W) weight plane
/// broadcast over N and C.
template <typename T>
T masked_l1(const BasicGrid<T>& pred, const BasicGrid<T>& target,
            const BasicGrid<T>& weight, double coef);
template <typename T>
BasicGrid<T> masked_l1_backward(const BasicGrid<T>& pred,
                                const BasicGrid<T>& target,
                                const BasicGrid<T>& weight, double coef,
                                T grad_out = T{1});

/// -coef * sum_k (w * onehot_k) * log(max(p_k, floor)).
template <typename T>
T masked_ce(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
            const BasicGrid<T>& weight, double coef, double floor = 1e-12);
template <typename T>
BasicGrid<T> masked_ce_backward(const BasicGrid<T>& probs,
                                const BasicGrid<T>& onehot,
                                const BasicGrid<T>& weight, double coef,
                                double floor = 1e-12, T grad_out = T{1});

}  // namespace chansr::diff
