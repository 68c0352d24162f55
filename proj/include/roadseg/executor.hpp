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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "roadseg/kernels.hpp"
#include "roadseg/tensor.hpp"
#include "roadseg/weights.hpp"

namespace roadseg {

struct ForwardOptions {
  Exec exec;
  // Tap aliases or node names whose activations are returned.
  std::vector<std::string> capture;
  bool capture_all = false;
  // Replaces a node's computed output with the given tensor (same shape).
  std::map<std::string, Tensor, std::less<>> overrides;
};

struct ForwardResult {
  Tensor output;
  // Keyed by the name used in ForwardOptions::capture, or by node name when
  // capture_all is set (aliases are added too).
  std::map<std::string, Tensor, std::less<>> taps;

  const Tensor& tap(std::string_view name) const;
};

// Executes the graph in topological order. Each call owns its activations, so
// one BoundModel may serve concurrent calls.
ForwardResult forward(const BoundModel& model, const Tensor& input,
                      const ForwardOptions& options = {});

}  // namespace roadseg
