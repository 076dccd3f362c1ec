// SPDX-License-Identifier: Apache-2.0
#include "chansr/model.hpp"

#include <cmath>

#include "chansr/error.hpp"
#include "chansr/random.hpp"

namespace chansr::model {

std::string_view task_name(Task t) {
  switch (t) {
    case Task::kPathLoss: return "PL";
    case Task::kPowerRatio: return "Rp";
    case Task::kDelaySpread: return "DS";
    case Task::kAzimuthSpread: return "phi";
    case Task::kElevationSpread: return "theta";
    case Task::kLos: return "LOS";
  }
  return "?";
}

std::vector<std::string> tensor_names(const ArchConfig& config) {
  std::vector<std::string> out;
  auto push = [&out](const std::string& stem) {
    out.push_back(stem + ".weight");
    out.push_back(stem + ".bias");
  };
  for (int b = 0; b < config.n_blocks; ++b) {
    push("block" + std::to_string(b) + ".conv1");
    push("block" + std::to_string(b) + ".conv2");
  }
  for (Task t : kAllTasks) {
    const std::string stem = "head." + std::string(task_name(t));
    push(stem + ".conv1");
    push(stem + ".conv2");
  }
  out.emplace_back("log_sigma");
  return out;
}

Channel target_channel(Task t) {
  return t == Task::kLos ? Channel::kLosCode : Channel{idx(t) + 1};
}

void ArchConfig::validate() const {
  if (n_blocks < 1) throw InvalidArgument("n_blocks must be >= 1");
  if (in_channels < 1) throw InvalidArgument("in_channels must be >= 1");
  if (block_mid < in_channels) {
    throw InvalidArgument("block_mid must be >= in_channels (up-and-down schedule)");
  }
  if (head_mid < 1) throw InvalidArgument("head_mid must be >= 1");
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    if (head_out[static_cast<std::size_t>(t)] != 1) {
      throw InvalidArgument("regression heads must have one output channel");
    }
  }
  if (head_out[kNumRegressionTasks] != kNumClasses) {
    throw InvalidArgument("classifier head must have three output channels");
  }
}

ArchConfig flat_config(ArchConfig base) {
  base.block_mid = base.in_channels;
  base.residual = false;
  return base;
}

std::size_t closed_form_param_count(const ArchConfig& c, bool include_log_sigma) {
  auto conv = [](std::size_t in, std::size_t out) { return out * in * 9 + out; };
  const auto in = static_cast<std::size_t>(c.in_channels);
  const auto mid = static_cast<std::size_t>(c.block_mid);
  const auto hm = static_cast<std::size_t>(c.head_mid);
  std::size_t total = static_cast<std::size_t>(c.n_blocks) * (conv(in, mid) + conv(mid, in));
  for (int out : c.head_out) total += conv(in, hm) + conv(hm, static_cast<std::size_t>(out));
  if (include_log_sigma) total += kNumTasks;
  return total;
}

template <typename T>
BasicModelParams<T> BasicModelParams<T>::zeros(const ArchConfig& config) {
  config.validate();
  BasicModelParams p;
  p.config = config;
  for (int b = 0; b < config.n_blocks; ++b) {
    p.blocks.push_back({diff::ConvKernel<T>(config.block_mid, config.in_channels),
                        diff::ConvKernel<T>(config.in_channels, config.block_mid)});
  }
  for (int t = 0; t < kNumTasks; ++t) {
    auto& h = p.heads[static_cast<std::size_t>(t)];
    h.conv1 = diff::ConvKernel<T>(config.head_mid, config.in_channels);
    h.conv2 = diff::ConvKernel<T>(config.head_out[static_cast<std::size_t>(t)],
                                  config.head_mid);
  }
  return p;
}

template <typename T>
std::vector<std::span<T>> BasicModelParams<T>::tensors() {
  std::vector<std::span<T>> out;
  auto push = [&out](diff::ConvKernel<T>& k) {
    out.emplace_back(k.weights.values());
    out.emplace_back(k.bias);
  };
  for (auto& b : blocks) {
    push(b.conv1);
    push(b.conv2);
  }
  for (auto& h : heads) {
    push(h.conv1);
    push(h.conv2);
  }
  out.emplace_back(log_sigma);
  return out;
}

template <typename T>
std::vector<std::span<const T>> BasicModelParams<T>::tensors() const {
  auto spans = const_cast<BasicModelParams*>(this)->tensors();
  return {spans.begin(), spans.end()};
}

template <typename T>
std::pair<std::size_t, std::size_t> BasicModelParams<T>::head_tensor_range(Task t) const {
  const std::size_t first = backbone_tensor_count() + static_cast<std::size_t>(idx(t)) * 4;
  return {first, first + 4};
}

template <typename T>
std::size_t BasicModelParams<T>::count() const {
  std::size_t n = 0;
  for (const auto& s : tensors()) n += s.size();
  return n;
}

template <typename T>
template <typename U>
BasicModelParams<U> BasicModelParams<T>::cast() const {
  auto out = BasicModelParams<U>::zeros(config);
  auto src = tensors();
  auto dst = out.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < src[i].size(); ++j) {
      dst[i][j] = static_cast<U>(src[i][j]);
    }
  }
  return out;
}

template <typename T>
BasicModelParams<T> build_model(const ArchConfig& config, std::uint64_t seed) {
  auto p = BasicModelParams<T>::zeros(config);
  Rng rng(seed);
  auto init = [&rng](diff::ConvKernel<T>& k) {
    const double fan_in = static_cast<double>(k.c_in()) * k.k() * k.k();
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& w : k.weights.values()) w = static_cast<T>(rng.uniform(-bound, bound));
  };
  for (auto& b : p.blocks) {
    init(b.conv1);
    init(b.conv2);
  }
  for (auto& h : p.heads) {
    init(h.conv1);
    init(h.conv2);
  }
  return p;
}

template <typename T>
BasicGrid<T> forward_backbone(const BasicModelParams<T>& params,
                              const BasicGrid<T>& input, ForwardCache<T>* cache) {
  if (input.c() != params.config.in_channels) {
    throw ShapeError("model input has " + std::to_string(input.c()) +
                     " channels, expected " + std::to_string(params.config.in_channels));
  }
  if (cache) cache->blocks.clear();
  BasicGrid<T> x = input;
  for (const auto& block : params.blocks) {
    BasicGrid<T> z1 = diff::conv2d_forward(x, block.conv1);
    BasicGrid<T> y = diff::conv2d_forward(diff::relu_forward(z1), block.conv2);
    if (params.config.residual) y = diff::add(y, x);
    if (cache) cache->blocks.push_back({std::move(x), std::move(z1)});
    x = std::move(y);
  }
  require_finite(x, "backbone output");
  if (cache) {
    cache->features = x;
    cache->has_backbone = true;
  }
  return x;
}

template <typename T>
BasicModelOutput<T> forward_heads(const BasicModelParams<T>& params,
                                  const BasicGrid<T>& features, ForwardCache<T>* cache) {
  if (features.c() != params.config.in_channels) {
    throw ShapeError("head input has " + std::to_string(features.c()) + " channels");
  }
  BasicModelOutput<T> out;
  for (Task t : kAllTasks) {
    const auto& head = params.heads[static_cast<std::size_t>(idx(t))];
    BasicGrid<T> z1 = diff::conv2d_forward(features, head.conv1);
    BasicGrid<T> z2 = diff::conv2d_forward(diff::relu_forward(z1), head.conv2);
    if (t == Task::kLos) {
      out.probs = diff::softmax_channels(z2);
    } else {
      out.regression[static_cast<std::size_t>(idx(t))] = std::move(z2);
    }
    if (cache) cache->heads[static_cast<std::size_t>(idx(t))].z1 = std::move(z1);
  }
  for (const auto& r : out.regression) require_finite(r, "regression head output");
  require_finite(out.probs, "classifier output");
  if (cache) {
    if (!cache->has_backbone) cache->features = features;
    cache->output = out;
    cache->has_heads = true;
  }
  return out;
}

template <typename T>
BasicModelOutput<T> forward(const BasicModelParams<T>& params,
                            const BasicGrid<T>& input, ForwardCache<T>* cache) {
  if (cache) *cache = ForwardCache<T>{};
  return forward_heads(params, forward_backbone(params, input, cache), cache);
}

template <typename T>
void backward(const BasicModelParams<T>& params, const ForwardCache<T>& cache,
              const TaskGradients<T>& upstream, BasicModelParams<T>& grads,
              const BackwardOptions& opts) {
  if (!cache.has_heads) throw Error("backward: forward cache is missing head activations");
  if (opts.backbone && !cache.has_backbone) {
    throw Error("backward: forward cache is missing backbone activations");
  }
  if (!(grads.config == params.config)) {
    throw ShapeError("backward: gradient buffers built for a different ArchConfig");
  }

  BasicGrid<T> grad_features(cache.features.shape());
  for (Task t : kAllTasks) {
    const auto ti = static_cast<std::size_t>(idx(t));
    const auto& head = params.heads[ti];
    auto& gh = grads.heads[ti];
    const BasicGrid<T>& go = upstream.outputs[ti];
    if (go.empty()) {
      gh.conv1.weights.fill(T{});
      std::fill(gh.conv1.bias.begin(), gh.conv1.bias.end(), T{});
      gh.conv2.weights.fill(T{});
      std::fill(gh.conv2.bias.begin(), gh.conv2.bias.end(), T{});
      continue;
    }
    const BasicGrid<T>& z1 = cache.heads[ti].z1;
    BasicGrid<T> grad_z2 = t == Task::kLos
                               ? diff::softmax_channels_backward(cache.output.probs, go)
                               : go;
    auto g2 = diff::conv2d_backward(diff::relu_forward(z1), head.conv2, grad_z2);
    auto g1 = diff::conv2d_backward(cache.features, head.conv1,
                                    diff::relu_backward(z1, g2.input), opts.backbone);
    gh.conv2.weights = std::move(g2.weights);
    gh.conv2.bias = std::move(g2.bias);
    gh.conv1.weights = std::move(g1.weights);
    gh.conv1.bias = std::move(g1.bias);
    if (opts.backbone) {
      for (std::size_t i = 0; i < grad_features.size(); ++i) {
        grad_features.data()[i] += g1.input.data()[i];
      }
    }
  }

  if (opts.backbone) {
    BasicGrid<T> g = std::move(grad_features);
    for (std::size_t b = params.blocks.size(); b-- > 0;) {
      const auto& block = params.blocks[b];
      const auto& bc = cache.blocks[b];
      auto g2 = diff::conv2d_backward(diff::relu_forward(bc.z1), block.conv2, g);
      auto g1 = diff::conv2d_backward(bc.x, block.conv1,
                                      diff::relu_backward(bc.z1, g2.input));
      auto& gb = grads.blocks[b];
      gb.conv2.weights = std::move(g2.weights);
      gb.conv2.bias = std::move(g2.bias);
      gb.conv1.weights = std::move(g1.weights);
      gb.conv1.bias = std::move(g1.bias);
      if (params.config.residual) {
        for (std::size_t i = 0; i < g.size(); ++i) g1.input.data()[i] += g.data()[i];
      }
      g = std::move(g1.input);
    }
  }

  if (upstream.has_log_sigma) grads.log_sigma = upstream.log_sigma;
}

#define CHANSR_INSTANTIATE_MODEL(T)                                              \
  template struct BasicModelParams<T>;                                           \
  template BasicModelParams<T> build_model(const ArchConfig&, std::uint64_t);    \
  template BasicGrid<T> forward_backbone(const BasicModelParams<T>&,             \
                                         const BasicGrid<T>&, ForwardCache<T>*); \
  template BasicModelOutput<T> forward_heads(const BasicModelParams<T>&,         \
                                             const BasicGrid<T>&, ForwardCache<T>*); \
  template BasicModelOutput<T> forward(const BasicModelParams<T>&,               \
                                       const BasicGrid<T>&, ForwardCache<T>*);   \
  template void backward(const BasicModelParams<T>&, const ForwardCache<T>&,     \
                         const TaskGradients<T>&, BasicModelParams<T>&,          \
                         const BackwardOptions&);

CHANSR_INSTANTIATE_MODEL(float)
CHANSR_INSTANTIATE_MODEL(double)

template BasicModelParams<double> BasicModelParams<float>::cast<double>() const;
template BasicModelParams<float> BasicModelParams<double>::cast<float>() const;
template BasicModelParams<float> BasicModelParams<float>::cast<float>() const;

#undef CHANSR_INSTANTIATE_MODEL

}  // namespace chansr::model
