// SPDX-License-Identifier: Apache-2.0
#include "chansr/metrics.hpp"

#include <cmath>

#include "chansr/error.hpp"

namespace chansr::eval {

using model::kNumRegressionTasks;

Prediction prediction_from_output(const model::ModelOutput& out,
                                  const dataset::Normalization& norm) {
  Prediction p;
  p.h = out.probs.h();
  p.w = out.probs.w();
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    const int c = t + 1;
    const Grid4& src = out.regression[static_cast<std::size_t>(t)];
    Grid4 dst(1, 1, p.h, p.w);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst.data()[i] = norm.denormalize(c, src.data()[i]);
    }
    p.values[static_cast<std::size_t>(t)] = std::move(dst);
  }
  p.classes.resize(static_cast<std::size_t>(p.h) * p.w);
  for (std::size_t i = 0; i < p.classes.size(); ++i) {
    int best = 0;
    for (int k = 1; k < model::kNumClasses; ++k) {
      if (out.probs.plane(0, k)[i] > out.probs.plane(0, best)[i]) best = k;
    }
    p.classes[i] = static_cast<std::uint8_t>(best);
  }
  return p;
}

Prediction prediction_from_degraded(const dataset::DegradedMap& lr) {
  Prediction p;
  p.h = lr.data.h();
  p.w = lr.data.w();
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    Grid4 dst(1, 1, p.h, p.w);
    const auto src = lr.data.plane(0, t + 1);
    std::copy(src.begin(), src.end(), dst.data());
    p.values[static_cast<std::size_t>(t)] = std::move(dst);
  }
  const auto codes = lr.data.plane(0, ch(Channel::kLosCode));
  p.classes.resize(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    p.classes[i] = static_cast<std::uint8_t>(los_state_from_code(codes[i]));
  }
  return p;
}

void MetricsAccumulator::add(const Prediction& pred, const ChannelMap& hr,
                             const loss::MaskPair& masks) {
  if (pred.h != hr.h() || pred.w != hr.w() || masks.h() != hr.h() ||
      masks.w() != hr.w()) {
    throw ShapeError("compute_metrics: prediction, map and masks disagree in size");
  }
  ++samples_;
  const auto plane = static_cast<std::size_t>(hr.h()) * hr.w();
  const auto code = hr.data.plane(0, ch(Channel::kLosCode));
  for (std::size_t i = 0; i < plane; ++i) {
    if (masks.m_na.data()[i] != 1.0f || masks.m_gt.data()[i] != 1.0f) continue;
    ++cells_;
    for (int t = 0; t < kNumRegressionTasks; ++t) {
      const double truth = hr.data.plane(0, t + 1)[i];
      const double e = static_cast<double>(pred.values[static_cast<std::size_t>(t)].data()[i]) - truth;
      Running& r = running_[static_cast<std::size_t>(t)];
      r.abs_sum += std::abs(e);
      const double delta = e - r.mean;
      r.mean += delta / static_cast<double>(cells_);
      r.m2 += delta * (e - r.mean);
    }
    const auto truth_class = static_cast<std::uint8_t>(los_state_from_code(code[i]));
    if (pred.classes[i] == truth_class) ++correct_;
  }
}

MetricsReport MetricsAccumulator::finish(std::string model_id, int scale) const {
  if (cells_ == 0) throw InvalidArgument("metrics undefined: no valid cells");
  MetricsReport r;
  r.model_id = std::move(model_id);
  r.scale = scale;
  r.sample_count = samples_;
  r.cell_count = cells_;
  const auto n = static_cast<double>(cells_);
  for (int t = 0; t < kNumRegressionTasks; ++t) {
    const Running& run = running_[static_cast<std::size_t>(t)];
    r.targets[static_cast<std::size_t>(t)] = {run.abs_sum / n,
                                              std::sqrt(std::max(0.0, run.m2 / n))};
  }
  r.accuracy = static_cast<double>(correct_) / n;
  return r;
}

MetricsReport compute_metrics(const Prediction& pred, const ChannelMap& hr,
                              const loss::MaskPair& masks) {
  MetricsAccumulator acc;
  acc.add(pred, hr, masks);
  return acc.finish("model", 0);
}

MetricsReport compute_metrics(const model::ModelOutput& pred,
                              const dataset::Normalization& norm,
                              const ChannelMap& hr, const loss::MaskPair& masks) {
  return compute_metrics(prediction_from_output(pred, norm), hr, masks);
}

MetricsReport bilinear_baseline(const std::vector<ChannelMap>& hr, int s) {
  MetricsAccumulator acc;
  for (const auto& m : hr) {
    acc.add(prediction_from_degraded(dataset::degrade(m, s)), m, loss::build_masks(m, s));
  }
  return acc.finish("bilinear", s);
}

MetricsReport bilinear_baseline(const ChannelMap& hr, int s) {
  return bilinear_baseline(std::vector<ChannelMap>{hr}, s);
}

MetricsReport evaluate_model(const model::ModelParams& params,
                             const std::vector<ChannelMap>& hr, int s,
                             const dataset::Normalization& norm,
                             std::string model_id) {
  MetricsAccumulator acc;
  for (const auto& m : hr) {
    const auto lr = dataset::degrade(m, s);
    const auto out = model::forward(params, norm.normalize(lr.data));
    acc.add(prediction_from_output(out, norm), m, loss::build_masks(m, s));
  }
  return acc.finish(std::move(model_id), s);
}

}  // namespace chansr::eval
