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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace roadseg {

struct SelftestCheck {
  std::string group;  // kernels, params, format, golden
  std::string name;
  bool pass = false;
  std::string detail;
};

// Published trainable-parameter counts at the default configuration.
struct PublishedCount {
  const char* variant;
  std::int64_t params;
};
inline constexpr PublishedCount kPublishedParams[] = {
    {"stage1", 157'634},        {"stage2", 683'330},  {"stage3", 2'783'298},
    {"stage4", 11'177'538},     {"sdb", 183'106},     {"csb", 700'098},
    {"csb-agg", 736'706},       {"selfuse-noagg", 899'459},
    {"concat", 919'170},        {"product", 902'786}, {"add", 902'786},
    {"full", 936'067},
};

struct OracleSuite {
  int instances = 0;
  int failures = 0;
  double max_abs_diff = 0.0;
  std::string first_failure;
  bool pass() const { return instances > 0 && failures == 0; }
};

// Optimized conv, max-pool and resize against the naive references on
// `count` seeded random instances of at most (2, 8, 16, 16); pass when every
// max abs diff is <= 1e-5.
OracleSuite kernel_oracle_suite(std::uint64_t seed, int count);

// max_f and average_precision against brute-force sweeps on `count` random
// instances (<= 5 maps of <= 16 x 16), compared exactly.
OracleSuite metrics_oracle_suite(std::uint64_t seed, int count);

// Kernel oracles on seeded random instances, the parameter table, codec
// round-trips and, when `fixtures` is set, the golden-activation comparison.
// Throws DataError when the fixture directory cannot be read.
std::vector<SelftestCheck> run_selftest(const std::optional<std::filesystem::path>& fixtures,
                                        std::uint64_t seed = 20240607);

}  // namespace roadseg
