// SPDX-License-Identifier: Apache-2.0
#include "chansr/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "chansr/ops.hpp"

namespace chansr::diff {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const GradCheckOp& op, std::uint64_t seed, double eps) {
  Rng rng(seed);
  std::vector<Grid4d> inputs;
  inputs.reserve(op.inputs.size());
  for (const auto& s : op.inputs) {
    Grid4d g(s);
    for (auto& v : g.values()) v = rng.normal();
    inputs.push_back(std::move(g));
  }
  if (op.sample) op.sample(inputs, rng);

  const Grid4d out = op.forward(inputs);
  Grid4d probe(out.shape());
  for (auto& v : probe.values()) v = rng.normal();
  auto functional = [&](const Grid4d& o) {
    double s = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) s += probe.data()[i] * o.data()[i];
    return s;
  };

  const auto analytic = op.backward(inputs, probe);
  if (analytic.size() != inputs.size()) {
    throw ShapeError(op.name + ": backward returned " +
                     std::to_string(analytic.size()) + " gradients for " +
                     std::to_string(inputs.size()) + " inputs");
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    require_same_shape(analytic[k].shape(), inputs[k].shape(),
                       op.name + " gradient " + std::to_string(k));
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      double& x = inputs[k].data()[i];
      const double saved = x;
      x = saved + eps;
      const double fp = functional(op.forward(inputs));
      x = saved - eps;
      const double fm = functional(op.forward(inputs));
      x = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(analytic[k].data()[i], numeric);
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = op.name + "[" + std::to_string(k) + "]";
        result.worst_index = i;
      }
    }
  }
  return result;
}

namespace {

Grid4d scalar_grid(double v) {
  Grid4d g(1, 1, 1, 1);
  g.data()[0] = v;
  return g;
}

Grid4d random_weight_plane(const Shape4& s, Rng& rng) {
  Grid4d w(1, 1, s.h, s.w);
  for (auto& v : w.values()) v = rng.uniform() < 0.3 ? 0.01 : 1.0;
  return w;
}

// Pushes every value at least `margin` away from zero.
void away_from_zero(Grid4d& g, double margin) {
  for (auto& v : g.values()) {
    if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;
  }
}

}  // namespace

GradCheckOp conv2d_check(Shape4 input, int c_out, int k) {
  GradCheckOp op;
  op.name = "conv2d";
  op.inputs = {input, Shape4{c_out, input.c, k, k}, Shape4{1, 1, 1, c_out}};
  auto kernel_of = [](const std::vector<Grid4d>& in) {
    ConvKernel<double> kern;
    kern.weights = in[1];
    kern.bias.assign(in[2].values().begin(), in[2].values().end());
    return kern;
  };
  op.forward = [kernel_of](const std::vector<Grid4d>& in) {
    return conv2d_forward(in[0], kernel_of(in));
  };
  op.backward = [kernel_of](const std::vector<Grid4d>& in, const Grid4d& go) {
    auto g = conv2d_backward(in[0], kernel_of(in), go);
    Grid4d gb(in[2].shape());
    std::copy(g.bias.begin(), g.bias.end(), gb.data());
    return std::vector<Grid4d>{std::move(g.input), std::move(g.weights), std::move(gb)};
  };
  return op;
}

GradCheckOp relu_check(Shape4 shape) {
  GradCheckOp op;
  op.name = "relu";
  op.inputs = {shape};
  op.forward = [](const std::vector<Grid4d>& in) { return relu_forward(in[0]); };
  op.backward = [](const std::vector<Grid4d>& in, const Grid4d& go) {
    return std::vector<Grid4d>{relu_backward(in[0], go)};
  };
  op.sample = [](std::vector<Grid4d>& in, Rng&) { away_from_zero(in[0], 0.05); };
  return op;
}

GradCheckOp softmax_check(Shape4 shape) {
  GradCheckOp op;
  op.name = "softmax_channels";
  op.inputs = {shape};
  op.forward = [](const std::vector<Grid4d>& in) { return softmax_channels(in[0]); };
  op.backward = [](const std::vector<Grid4d>& in, const Grid4d& go) {
    return std::vector<Grid4d>{softmax_channels_backward(softmax_channels(in[0]), go)};
  };
  return op;
}

GradCheckOp add_check(Shape4 shape) {
  GradCheckOp op;
  op.name = "add";
  op.inputs = {shape, shape};
  op.forward = [](const std::vector<Grid4d>& in) { return add(in[0], in[1]); };
  op.backward = [](const std::vector<Grid4d>&, const Grid4d& go) {
    Grid4d ga, gb;
    add_backward(go, ga, gb);
    return std::vector<Grid4d>{std::move(ga), std::move(gb)};
  };
  return op;
}

GradCheckOp scale_affine_check(Shape4 shape, double a, double b) {
  GradCheckOp op;
  op.name = "scale_affine";
  op.inputs = {shape};
  op.forward = [a, b](const std::vector<Grid4d>& in) { return scale_affine(in[0], a, b); };
  op.backward = [a](const std::vector<Grid4d>&, const Grid4d& go) {
    return std::vector<Grid4d>{scale_affine_backward(go, a)};
  };
  return op;
}

GradCheckOp masked_l1_check(Shape4 shape, std::uint64_t aux_seed) {
  Rng rng(aux_seed);
  Grid4d target(shape);
  for (auto& v : target.values()) v = rng.normal();
  Grid4d weight = random_weight_plane(shape, rng);
  const double coef = 0.37;

  GradCheckOp op;
  op.name = "masked_l1";
  op.inputs = {shape};
  op.forward = [=](const std::vector<Grid4d>& in) {
    return scalar_grid(masked_l1(in[0], target, weight, coef));
  };
  op.backward = [=](const std::vector<Grid4d>& in, const Grid4d& go) {
    return std::vector<Grid4d>{masked_l1_backward(in[0], target, weight, coef, go.data()[0])};
  };
  // Keep every weighted residual clear of the |.| kink.
  op.sample = [=](std::vector<Grid4d>& in, Rng&) {
    Grid4d diff(shape);
    for (std::size_t i = 0; i < diff.size(); ++i) {
      diff.data()[i] = in[0].data()[i] - target.data()[i];
    }
    away_from_zero(diff, 0.05);
    for (std::size_t i = 0; i < diff.size(); ++i) {
      in[0].data()[i] = target.data()[i] + diff.data()[i];
    }
  };
  return op;
}

GradCheckOp masked_ce_check(Shape4 shape, std::uint64_t aux_seed) {
  Rng rng(aux_seed);
  Grid4d onehot(shape);
  for (int n = 0; n < shape.n; ++n) {
    for (std::size_t i = 0; i < shape.plane(); ++i) {
      const int k = rng.uniform_int(0, shape.c - 1);
      onehot.plane(n, k)[i] = 1.0;
    }
  }
  Grid4d weight = random_weight_plane(shape, rng);
  const double coef = 0.37;

  GradCheckOp op;
  op.name = "masked_ce";
  op.inputs = {shape};
  op.forward = [=](const std::vector<Grid4d>& in) {
    return scalar_grid(masked_ce(in[0], onehot, weight, coef));
  };
  op.backward = [=](const std::vector<Grid4d>& in, const Grid4d& go) {
    return std::vector<Grid4d>{
        masked_ce_backward(in[0], onehot, weight, coef, 1e-12, go.data()[0])};
  };
  op.sample = [](std::vector<Grid4d>& in, Rng& r) {
    for (auto& v : in[0].values()) v = r.uniform(0.05, 1.0);
  };
  return op;
}

std::vector<GradCheckOp> registered_ops(std::uint64_t aux_seed) {
  return {
      conv2d_check({1, 2, 6, 6}, 3),
      relu_check({1, 3, 5, 5}),
      softmax_check({1, 3, 4, 4}),
      add_check({1, 2, 4, 4}),
      scale_affine_check({1, 2, 4, 4}, 1.7, -0.3),
      masked_l1_check({1, 1, 6, 6}, aux_seed),
      masked_ce_check({1, 3, 4, 4}, aux_seed),
  };
}

}  // namespace chansr::diff
