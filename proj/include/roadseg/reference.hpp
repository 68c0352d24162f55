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

// Straightforward reference implementations used as test oracles. Nothing in
// the inference path links against these.

#include <span>

#include "roadseg/kernels.hpp"
#include "roadseg/metrics.hpp"
#include "roadseg/tensor.hpp"

namespace roadseg::reference {

// Seven nested loops over (n, co, oy, ox, ci, ky, kx), accumulated in double.
Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
              const ConvSpec& spec);

Tensor maxpool2d(const Tensor& input, const PoolSpec& spec);

// Half-pixel bilinear resize evaluated in double precision per output pixel.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// Brute-force pooled scan: for every k = 0..n, binarize every map at k / n
// and count.
MaxFResult max_f(std::span<const ProbMap> probs, std::span<const Mask> gts, int n_thresholds);

// 11-point AP computed directly from per-threshold brute-force counts over k = 1..n.
double average_precision(std::span<const ProbMap> probs, std::span<const Mask> gts,
                         int n_thresholds);

}  // namespace roadseg::reference
