// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "chansr/grid.hpp"
#include "chansr/random.hpp"

namespace chansr::diff {

/// An op under test: a forward map from differentiable inputs to an output
/// grid (scalar outputs use shape (1,1,1,1)) plus its analytic backward.
struct GradCheckOp {
  std::string name;
  std::vector<Shape4> inputs;
  std::function<Grid4d(const std::vector<Grid4d>&)> forward;
  std::function<std::vector<Grid4d>(const std::vector<Grid4d>& inputs,
                                    const Grid4d& grad_out)>
      backward;
  /// Optional hook to reshape the random draw, e.g. to keep inputs away
  /// from kinks. Default draws are standard normal.
  std::function<void(std::vector<Grid4d>&, Rng&)> sample;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_input;
  std::size_t worst_index = 0;
};

double relative_error(double analytic, double numeric);

/// Compares the analytic gradient of a random linear functional of the
/// output against central differences for every input element and returns
/// the worst relative error.
GradCheckResult grad_check(const GradCheckOp& op, std::uint64_t seed,
                           double eps = 1e-3);

GradCheckOp conv2d_check(Shape4 input, int c_out, int k = 3);
GradCheckOp relu_check(Shape4 shape);
GradCheckOp softmax_check(Shape4 shape);
GradCheckOp add_check(Shape4 shape);
GradCheckOp scale_affine_check(Shape4 shape, double a, double b);
/// Target and weight plane are fixed draws from `aux_seed`.
GradCheckOp masked_l1_check(Shape4 shape, std::uint64_t aux_seed);
GradCheckOp masked_ce_check(Shape4 shape, std::uint64_t aux_seed);

/// Every differentiable op at small default shapes.
std::vector<GradCheckOp> registered_ops(std::uint64_t aux_seed);

}  // namespace chansr::diff
