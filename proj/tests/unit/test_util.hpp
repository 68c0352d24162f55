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

#include <cstdint>
#include <random>

#include "roadseg/tensor.hpp"

namespace roadseg::testing {

inline Tensor random_tensor(std::mt19937_64& rng, Shape s, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(s.numel());
  for (auto& x : v) x = dist(rng);
  return Tensor(s, std::move(v));
}

inline Tensor iota(Shape s, float start = 1.0f) {
  std::vector<float> v(s.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + static_cast<float>(i);
  return Tensor(s, std::move(v));
}

}  // namespace roadseg::testing
