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

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "roadseg/executor.hpp"
#include "roadseg/graph.hpp"
#include "roadseg/image.hpp"
#include "roadseg/weights.hpp"

namespace roadseg {

// Per-pixel road probability in [0, 1].
struct ProbMap {
  int h = 0;
  int w = 0;
  std::vector<float> values;
  bool operator==(const ProbMap&) const = default;
};

// Binary mask, one byte per pixel holding 0 or 1.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> values;
  bool operator==(const Mask&) const = default;
};

inline constexpr std::array<float, 3> kImageMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageStd{0.229f, 0.224f, 0.225f};
// Logit channel that carries the road class.
inline constexpr int kRoadChannel = 1;

// Scales to [0, 1] and normalizes per channel; returns the (1, 3, H, W)
// full-resolution input. The context-branch resize happens inside the graph.
Tensor preprocess(const ImageBuffer& image);
// Same, rejecting images whose size differs from config.input_hw.
Tensor preprocess(const ImageBuffer& image, const VariantConfig& config);

// Softmax over the two logit channels of image 0, returning the road channel.
ProbMap road_probability(const Tensor& logits, Exec exec = {});

ProbMap predict(const BoundModel& model, const ImageBuffer& image, Exec exec = {});

Mask to_mask(const ProbMap& probs, float threshold);

struct Rgb {
  std::uint8_t r = 255, g = 0, b = 0;
};
ImageBuffer overlay(const ImageBuffer& image, const Mask& mask, Rgb color = {}, float alpha = 0.5f);

// Ground truth from an 8-bit grayscale mask: value > 127 is road.
Mask mask_from_gray(const GrayImage& gray);
GrayImage mask_to_gray(const Mask& mask);            // 0 / 255, 8-bit
GrayImage prob_to_gray16(const ProbMap& probs);     // round(p * 65535), 16-bit

// Binds weights lazily for each distinct input size; safe for concurrent use.
class Predictor {
 public:
  Predictor(std::shared_ptr<const WeightStore> weights, VariantConfig config);

  ProbMap predict(const ImageBuffer& image, Exec exec = {});
  std::shared_ptr<const BoundModel> model_for(int h, int w);

 private:
  std::shared_ptr<const WeightStore> weights_;
  VariantConfig config_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::shared_ptr<const BoundModel>> models_;
};

}  // namespace roadseg
