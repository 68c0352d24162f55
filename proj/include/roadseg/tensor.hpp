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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace roadseg {

// Dimensions of a dense NCHW tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

// Dense 4-D float32 tensor, row-major in n -> c -> h -> w order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }
  static Tensor ones(Shape shape) { return Tensor(shape, 1.0f); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Pointer to the first element of plane (n, c).
  float* plane(int n, int c) {
    return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
  }
  const float* plane(int n, int c) const {
    return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
  }

  float& at(int n, int c, int y, int x) {
    return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x];
  }
  float at(int n, int c, int y, int x) const {
    return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x];
  }

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Largest |a - b| over all elements; throws ShapeError on dim mismatch.
float max_abs_diff(const Tensor& a, const Tensor& b);

// Exact bitwise equality of shape and contents.
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace roadseg
