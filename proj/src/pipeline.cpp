/* Copyright 2026 The roadseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadseg/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "roadseg/error.hpp"

namespace roadseg {

Tensor preprocess(const ImageBuffer& image) {
  if (image.h < 1 || image.w < 1) throw DataError("cannot preprocess an empty image");
  Tensor out({1, 3, image.h, image.w});
  const std::size_t hw = static_cast<std::size_t>(image.h) * image.w;
  for (int c = 0; c < 3; ++c) {
    float* dst = out.plane(0, c);
    const float mean = kImageMean[c];
    const float inv_std = 1.0f / kImageStd[c];
    for (std::size_t i = 0; i < hw; ++i) {
      const float v = static_cast<float>(image.rgb[i * 3 + c]) / 255.0f;
      dst[i] = (v - mean) * inv_std;
    }
  }
  return out;
}

Tensor preprocess(const ImageBuffer& image, const VariantConfig& config) {
  if (image.h != config.input_hw.h || image.w != config.input_hw.w) {
    throw DataError(fmt::format("image is {}x{}, model expects {}x{}", image.h, image.w,
                                config.input_hw.h, config.input_hw.w));
  }
  return preprocess(image);
}

ProbMap road_probability(const Tensor& logits, Exec exec) {
  if (logits.c() != 2) {
    throw ShapeError(fmt::format("expected 2 logit channels, got {}", logits.c()));
  }
  const Tensor soft = softmax_channels(logits, exec);
  ProbMap p{logits.h(), logits.w(), {}};
  const float* road = soft.plane(0, kRoadChannel);
  p.values.assign(road, road + soft.shape().plane());
  return p;
}

ProbMap predict(const BoundModel& model, const ImageBuffer& image, Exec exec) {
  const Tensor input = preprocess(image, model.graph().config());
  ForwardOptions opts;
  opts.exec = exec;
  return road_probability(forward(model, input, opts).output, exec);
}

Mask to_mask(const ProbMap& probs, float threshold) {
  Mask m{probs.h, probs.w, std::vector<std::uint8_t>(probs.values.size())};
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    m.values[i] = probs.values[i] >= threshold ? 1 : 0;
  }
  return m;
}

ImageBuffer overlay(const ImageBuffer& image, const Mask& mask, Rgb color, float alpha) {
  if (image.h != mask.h || image.w != mask.w) {
    throw DataError(fmt::format("overlay: image {}x{} vs mask {}x{}", image.h, image.w, mask.h,
                                mask.w));
  }
  ImageBuffer out = image;
  const std::uint8_t tint[3] = {color.r, color.g, color.b};
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    if (!mask.values[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const float v = (1.0f - alpha) * image.rgb[i * 3 + c] + alpha * tint[c];
      out.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

Mask mask_from_gray(const GrayImage& gray) {
  const unsigned cut = gray.bit_depth == 16 ? 32767u : 127u;
  Mask m{gray.h, gray.w, std::vector<std::uint8_t>(gray.values.size())};
  for (std::size_t i = 0; i < gray.values.size(); ++i) m.values[i] = gray.values[i] > cut ? 1 : 0;
  return m;
}

GrayImage mask_to_gray(const Mask& mask) {
  GrayImage g{mask.h, mask.w, 8, std::vector<std::uint16_t>(mask.values.size())};
  for (std::size_t i = 0; i < mask.values.size(); ++i) g.values[i] = mask.values[i] ? 255 : 0;
  return g;
}

GrayImage prob_to_gray16(const ProbMap& probs) {
  GrayImage g{probs.h, probs.w, 16, std::vector<std::uint16_t>(probs.values.size())};
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probs.values[i]), 0.0, 1.0);
    g.values[i] = static_cast<std::uint16_t>(std::lround(p * 65535.0));
  }
  return g;
}

Predictor::Predictor(std::shared_ptr<const WeightStore> weights, VariantConfig config)
    : weights_(std::move(weights)), config_(config) {}

std::shared_ptr<const BoundModel> Predictor::model_for(int h, int w) {
  std::lock_guard lock(mutex_);
  auto key = std::make_pair(h, w);
  if (auto it = models_.find(key); it != models_.end()) return it->second;
  VariantConfig cfg = config_;
  cfg.input_hw = {h, w};
  auto model = std::make_shared<const BoundModel>(bind(build(cfg), *weights_));
  models_.emplace(key, model);
  return model;
}

ProbMap Predictor::predict(const ImageBuffer& image, Exec exec) {
  return roadseg::predict(*model_for(image.h, image.w), image, exec);
}

}  // namespace roadseg
