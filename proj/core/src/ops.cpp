// SPDX-License-Identifier: Apache-2.0
#include "chansr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace chansr::diff {

namespace {

void check_conv_shapes(const Shape4& in, const Shape4& w) {
  if (in.c != w.c) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) +
                     " channels, kernel expects " + std::to_string(w.c));
  }
  if (w.h != w.w || w.h % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " + w.str());
  }
}

template <typename T>
void check_weight_plane(const BasicGrid<T>& x, const BasicGrid<T>& weight,
                        const char* what) {
  if (weight.n() != 1 || weight.c() != 1 || weight.h() != x.h() ||
      weight.w() != x.w()) {
    throw ShapeError(std::string(what) + ": weight plane " + weight.shape().str() +
                     " does not match " + x.shape().str());
  }
}

}  // namespace

template <typename T>
BasicGrid<T> conv2d_forward(const BasicGrid<T>& input, const ConvKernel<T>& kernel) {
  check_conv_shapes(input.shape(), kernel.weights.shape());
  const int n_batch = input.n();
  const int c_in = input.c();
  const int c_out = kernel.c_out();
  const int h = input.h();
  const int w = input.w();
  const int k = kernel.k();
  const int pad = k / 2;
  BasicGrid<T> out(n_batch, c_out, h, w);
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < c_out; ++co) {
      T* dst = out.plane(n, co).data();
      std::fill(dst, dst + out.shape().plane(), kernel.bias[static_cast<std::size_t>(co)]);
      for (int ci = 0; ci < c_in; ++ci) {
        const T* src = input.plane(n, ci).data();
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            const T wt = kernel.weights(co, ci, ky, kx);
            for (int y = y0; y < y1; ++y) {
              T* drow = dst + static_cast<std::size_t>(y) * w;
              const T* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) drow[x] += wt * srow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicGrid<T>& input, const ConvKernel<T>& kernel,
                             const BasicGrid<T>& grad_out, bool want_input_grad) {
  check_conv_shapes(input.shape(), kernel.weights.shape());
  const Shape4 expect{input.n(), kernel.c_out(), input.h(), input.w()};
  require_same_shape(grad_out.shape(), expect, "conv2d_backward grad_out");
  const int n_batch = input.n();
  const int c_in = input.c();
  const int c_out = kernel.c_out();
  const int h = input.h();
  const int w = input.w();
  const int k = kernel.k();
  const int pad = k / 2;

  ConvGrads<T> g;
  g.weights = BasicGrid<T>(kernel.weights.shape());
  g.bias.assign(static_cast<std::size_t>(c_out), T{});
  if (want_input_grad) g.input = BasicGrid<T>(input.shape());

  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < c_out; ++co) {
      const T* go = grad_out.plane(n, co).data();
      T bsum{};
      for (std::size_t i = 0; i < grad_out.shape().plane(); ++i) bsum += go[i];
      g.bias[static_cast<std::size_t>(co)] += bsum;
      for (int ci = 0; ci < c_in; ++ci) {
        const T* src = input.plane(n, ci).data();
        T* gin = want_input_grad ? g.input.plane(n, ci).data() : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            const T wt = kernel.weights(co, ci, ky, kx);
            T acc{};
            for (int y = y0; y < y1; ++y) {
              const T* grow = go + static_cast<std::size_t>(y) * w;
              const T* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
              if (gin) {
                T* girow = gin + static_cast<std::size_t>(y + dy) * w + dx;
                for (int x = x0; x < x1; ++x) girow[x] += wt * grow[x];
              }
            }
            g.weights(co, ci, ky, kx) += acc;
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
BasicGrid<T> relu_forward(const BasicGrid<T>& x) {
  BasicGrid<T> out(x.shape());
  const T* s = x.data();
  T* d = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = s[i] > T{} ? s[i] : T{};
  return out;
}

template <typename T>
BasicGrid<T> relu_backward(const BasicGrid<T>& x, const BasicGrid<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "relu_backward");
  BasicGrid<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g.data()[i] = x.data()[i] > T{} ? grad_out.data()[i] : T{};
  }
  return g;
}

template <typename T>
BasicGrid<T> softmax_channels(const BasicGrid<T>& logits) {
  BasicGrid<T> out(logits.shape());
  const std::size_t plane = logits.shape().plane();
  for (int n = 0; n < logits.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      T mx = logits.plane(n, 0)[i];
      for (int c = 1; c < logits.c(); ++c) mx = std::max(mx, logits.plane(n, c)[i]);
      T sum{};
      for (int c = 0; c < logits.c(); ++c) {
        const T e = std::exp(logits.plane(n, c)[i] - mx);
        out.plane(n, c)[i] = e;
        sum += e;
      }
      for (int c = 0; c < logits.c(); ++c) out.plane(n, c)[i] /= sum;
    }
  }
  return out;
}

template <typename T>
BasicGrid<T> softmax_channels_backward(const BasicGrid<T>& probs,
                                       const BasicGrid<T>& grad_out) {
  require_same_shape(probs.shape(), grad_out.shape(), "softmax_channels_backward");
  BasicGrid<T> g(probs.shape());
  const std::size_t plane = probs.shape().plane();
  for (int n = 0; n < probs.n(); ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      T dot{};
      for (int c = 0; c < probs.c(); ++c) {
        dot += probs.plane(n, c)[i] * grad_out.plane(n, c)[i];
      }
      for (int c = 0; c < probs.c(); ++c) {
        g.plane(n, c)[i] = probs.plane(n, c)[i] * (grad_out.plane(n, c)[i] - dot);
      }
    }
  }
  return g;
}

template <typename T>
BasicGrid<T> add(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  BasicGrid<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

template <typename T>
void add_backward(const BasicGrid<T>& grad_out, BasicGrid<T>& grad_a,
                  BasicGrid<T>& grad_b) {
  grad_a = grad_out;
  grad_b = grad_out;
}

template <typename T>
BasicGrid<T> scale_affine(const BasicGrid<T>& x, T a, T b) {
  BasicGrid<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = a * x.data()[i] + b;
  return out;
}

template <typename T>
BasicGrid<T> scale_affine_backward(const BasicGrid<T>& grad_out, T a) {
  BasicGrid<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = a * grad_out.data()[i];
  return g;
}

template <typename T>
T masked_l1(const BasicGrid<T>& pred, const BasicGrid<T>& target,
            const BasicGrid<T>& weight, double coef) {
  require_same_shape(pred.shape(), target.shape(), "masked_l1");
  check_weight_plane(pred, weight, "masked_l1");
  const std::size_t plane = pred.shape().plane();
  const T* wp = weight.data();
  double sum = 0.0;
  for (int n = 0; n < pred.n(); ++n) {
    for (int c = 0; c < pred.c(); ++c) {
      const T* p = pred.plane(n, c).data();
      const T* t = target.plane(n, c).data();
      for (std::size_t i = 0; i < plane; ++i) {
        sum += std::abs(static_cast<double>(wp[i] * p[i] - wp[i] * t[i]));
      }
    }
  }
  return static_cast<T>(coef * sum);
}

template <typename T>
BasicGrid<T> masked_l1_backward(const BasicGrid<T>& pred, const BasicGrid<T>& target,
                                const BasicGrid<T>& weight, double coef,
                                T grad_out) {
  require_same_shape(pred.shape(), target.shape(), "masked_l1_backward");
  check_weight_plane(pred, weight, "masked_l1_backward");
  BasicGrid<T> g(pred.shape());
  const std::size_t plane = pred.shape().plane();
  const T* wp = weight.data();
  const T scale = static_cast<T>(coef) * grad_out;
  for (int n = 0; n < pred.n(); ++n) {
    for (int c = 0; c < pred.c(); ++c) {
      const T* p = pred.plane(n, c).data();
      const T* t = target.plane(n, c).data();
      T* d = g.plane(n, c).data();
      for (std::size_t i = 0; i < plane; ++i) {
        const T diff = wp[i] * p[i] - wp[i] * t[i];
        const T sign = diff > T{} ? T{1} : (diff < T{} ? T{-1} : T{});
        d[i] = scale * sign * wp[i];
      }
    }
  }
  return g;
}

template <typename T>
T masked_ce(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
            const BasicGrid<T>& weight, double coef, double floor) {
  require_same_shape(probs.shape(), onehot.shape(), "masked_ce");
  check_weight_plane(probs, weight, "masked_ce");
  const std::size_t plane = probs.shape().plane();
  const T* wp = weight.data();
  double sum = 0.0;
  for (int n = 0; n < probs.n(); ++n) {
    for (int c = 0; c < probs.c(); ++c) {
      const T* p = probs.plane(n, c).data();
      const T* t = onehot.plane(n, c).data();
      for (std::size_t i = 0; i < plane; ++i) {
        const double target = static_cast<double>(wp[i]) * t[i];
        if (target == 0.0) continue;
        sum += target * std::log(std::max(static_cast<double>(p[i]), floor));
      }
    }
  }
  return static_cast<T>(-coef * sum);
}

template <typename T>
BasicGrid<T> masked_ce_backward(const BasicGrid<T>& probs, const BasicGrid<T>& onehot,
                                const BasicGrid<T>& weight, double coef,
                                double floor, T grad_out) {
  require_same_shape(probs.shape(), onehot.shape(), "masked_ce_backward");
  check_weight_plane(probs, weight, "masked_ce_backward");
  BasicGrid<T> g(probs.shape());
  const std::size_t plane = probs.shape().plane();
  const T* wp = weight.data();
  for (int n = 0; n < probs.n(); ++n) {
    for (int c = 0; c < probs.c(); ++c) {
      const T* p = probs.plane(n, c).data();
      const T* t = onehot.plane(n, c).data();
      T* d = g.plane(n, c).data();
      for (std::size_t i = 0; i < plane; ++i) {
        const double pv = p[i];
        d[i] = pv > floor ? static_cast<T>(-coef * grad_out * wp[i] * t[i] / pv) : T{};
      }
    }
  }
  return g;
}

#define CHANSR_INSTANTIATE_OPS(T)                                               \
  template BasicGrid<T> conv2d_forward(const BasicGrid<T>&, const ConvKernel<T>&); \
  template ConvGrads<T> conv2d_backward(const BasicGrid<T>&, const ConvKernel<T>&, \
                                        const BasicGrid<T>&, bool);             \
  template BasicGrid<T> relu_forward(const BasicGrid<T>&);                     \
  template BasicGrid<T> relu_backward(const BasicGrid<T>&, const BasicGrid<T>&); \
  template BasicGrid<T> softmax_channels(const BasicGrid<T>&);                 \
  template BasicGrid<T> softmax_channels_backward(const BasicGrid<T>&,          \
                                                  const BasicGrid<T>&);         \
  template BasicGrid<T> add(const BasicGrid<T>&, const BasicGrid<T>&);         \
  template void add_backward(const BasicGrid<T>&, BasicGrid<T>&, BasicGrid<T>&); \
  template BasicGrid<T> scale_affine(const BasicGrid<T>&, T, T);               \
  template BasicGrid<T> scale_affine_backward(const BasicGrid<T>&, T);         \
  template T masked_l1(const BasicGrid<T>&, const BasicGrid<T>&,               \
                       const BasicGrid<T>&, double);                           \
  template BasicGrid<T> masked_l1_backward(const BasicGrid<T>&, const BasicGrid<T>&, \
                                           const BasicGrid<T>&, double, T);    \
  template T masked_ce(const BasicGrid<T>&, const BasicGrid<T>&,               \
                       const BasicGrid<T>&, double, double);                   \
  template BasicGrid<T> masked_ce_backward(const BasicGrid<T>&, const BasicGrid<T>&, \
                                           const BasicGrid<T>&, double, double, T);

CHANSR_INSTANTIATE_OPS(float)
CHANSR_INSTANTIATE_OPS(double)

#undef CHANSR_INSTANTIATE_OPS

}  // namespace chansr::diff
