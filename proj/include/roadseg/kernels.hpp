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

#include <optional>
#include <span>

#include "roadseg/tensor.hpp"

namespace roadseg {

// A (vertical, horizontal) integer pair used for kernel geometry.
struct Pair2 {
  int h = 1;
  int w = 1;
  bool operator==(const Pair2&) const = default;
};

struct ConvSpec {
  Pair2 kernel{1, 1};
  Pair2 stride{1, 1};
  Pair2 padding{0, 0};
  Pair2 dilation{1, 1};
  int groups = 1;
  bool bias = false;
};

// floor((in + 2p - d(k-1) - 1) / s) + 1; may be <= 0 for degenerate inputs.
int conv_out_dim(int in, int kernel, int stride, int pad, int dilation = 1);

// Output shape of conv2d for an input with `in_c` channels; throws ShapeError
// when any output dimension would be < 1.
Shape conv_output_shape(const Shape& in, int out_c, const ConvSpec& spec);

// Worker-thread count for a kernel call. Results never depend on this value:
// every kernel partitions its output into fixed tiles that are written by
// exactly one thread.
struct Exec {
  int threads = 1;
};

// Cross-correlation with zero padding. `weights` has dims
// (c_out, c_in / groups, kh, kw); `bias` (when present) has c_out entries.
Tensor conv2d(const Tensor& input, const Tensor& weights, std::optional<std::span<const float>> bias,
              const ConvSpec& spec, Exec exec = {});

struct BatchNormParams {
  std::span<const float> gamma;
  std::span<const float> beta;
  std::span<const float> mean;
  std::span<const float> var;
  float eps = 1e-5f;
};

// Inference-mode batch norm: (x - mean) / sqrt(var + eps) * gamma + beta.
Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& p, Exec exec = {});

Tensor relu(const Tensor& input, Exec exec = {});
Tensor sigmoid(const Tensor& input, Exec exec = {});
// Per-pixel softmax across the channel axis.
Tensor softmax_channels(const Tensor& input, Exec exec = {});

Tensor add(const Tensor& a, const Tensor& b, Exec exec = {});
// Elementwise product; `b` may have a single channel, broadcast over a's channels.
Tensor mul(const Tensor& a, const Tensor& b, Exec exec = {});
Tensor concat_channels(const Tensor& a, const Tensor& b);

struct PoolSpec {
  Pair2 kernel{3, 3};
  Pair2 stride{2, 2};
  Pair2 padding{1, 1};
};

Shape maxpool_output_shape(const Shape& in, const PoolSpec& spec);

// Max pooling; padded positions never win (treated as -inf).
Tensor maxpool2d(const Tensor& input, const PoolSpec& spec = {}, Exec exec = {});

// Bilinear resize with half-pixel centers (align_corners = false):
// src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w, Exec exec = {});

}  // namespace roadseg
