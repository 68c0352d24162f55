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

// Golden-fixture conformance. A fixture directory holds:
//   fixture.json  {"format": 1, "variant": "full", "input_hw": [H, W],
//                  "csb_ratio": [rv, rh], "tolerance": 1e-4, "taps": [...]}
//   weights.lfdw  every weight slot of the variant, running stats included
//   taps.lfdw     reference activations keyed by tap name, plus "prob", the
//                 (1, 1, H, W) road-probability map
//   image.png     8-bit RGB input of size H x W

#include <filesystem>
#include <string>
#include <vector>

#include "roadseg/graph.hpp"
#include "roadseg/kernels.hpp"
#include "roadseg/weights.hpp"

namespace roadseg {

struct FixtureMeta {
  VariantConfig config;
  double tolerance = 1e-4;
  std::vector<std::string> taps;
};

struct TapCheck {
  std::string name;
  Shape shape;
  double max_abs_diff = 0.0;
  double max_abs_ref = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ConformanceReport {
  std::vector<TapCheck> checks;
  bool pass() const;
};

// Throws DataError when the directory or a file in it is missing or malformed.
FixtureMeta read_fixture_meta(const std::filesystem::path& dir);

// Runs the fixture image through the engine with the fixture weights and
// compares every listed tap.
ConformanceReport check_fixture(const std::filesystem::path& dir, Exec exec = {});

}  // namespace roadseg
