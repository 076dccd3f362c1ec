// SPDX-License-Identifier: Apache-2.0
#include "chansr/optim.hpp"

#include <cmath>
#include <numeric>

#include "chansr/error.hpp"

namespace chansr::train {

AdamState AdamState::zeros(std::span<const std::size_t> sizes, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (std::size_t n : sizes) {
    s.m.emplace_back(n, 0.0f);
    s.v.emplace_back(n, 0.0f);
  }
  return s;
}

void adam_step(std::vector<std::span<float>> params,
               std::vector<std::span<const float>> grads, AdamState& state,
               double lr, std::span<const std::size_t> selected,
               std::span<const std::string> names) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient and state tensor counts differ");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw InvalidArgument("adam_step: learning rate must be finite and >= 0");
  }
  std::vector<std::size_t> all;
  if (selected.empty()) {
    all.resize(params.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    selected = all;
  }
  for (std::size_t t : selected) {
    if (t >= params.size()) throw InvalidArgument("adam_step: tensor index out of range");
    if (params[t].size() != grads[t].size() || params[t].size() != state.m[t].size()) {
      throw ShapeError("adam_step: size mismatch in tensor " + std::to_string(t));
    }
    for (float g : grads[t]) {
      if (!std::isfinite(g)) {
        const std::string name = t < names.size() ? names[t] : "tensor " + std::to_string(t);
        throw NonFiniteError("non-finite gradient in parameter group " + name);
      }
    }
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t ti : selected) {
    auto p = params[ti];
    auto g = grads[ti];
    auto& m = state.m[ti];
    auto& v = state.v[ti];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

}  // namespace chansr::train
