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

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "roadseg/conformance.hpp"
#include "roadseg/error.hpp"
#include "roadseg/executor.hpp"
#include "roadseg/image.hpp"
#include "roadseg/pipeline.hpp"

namespace roadseg {
namespace {

namespace fs = std::filesystem;

const fs::path kGolden = fs::path(ROADSEG_SOURCE_DIR) / "tests" / "fixtures" / "golden";

TEST(Fixture, MetaDescribesFullModel) {
  const FixtureMeta meta = read_fixture_meta(kGolden);
  EXPECT_EQ(variant_name(meta.config), "full");
  EXPECT_EQ(meta.config.input_hw, (Pair2{64, 128}));
  EXPECT_EQ(meta.config.csb_ratio, (Pair2{2, 4}));
  EXPECT_DOUBLE_EQ(meta.tolerance, 1e-4);
  for (const char* t : {"f1_high", "f2_low", "agg.block1.out", "agg.block2.out", "fa_low",
                        "attention", "fused", "logits", "prob"}) {
    EXPECT_NE(std::find(meta.taps.begin(), meta.taps.end(), t), meta.taps.end()) << t;
  }
}

TEST(Fixture, WeightsBindWithNothingMissing) {
  const FixtureMeta meta = read_fixture_meta(kGolden);
  const WeightStore store = read_file(kGolden / "weights.lfdw");
  const BindReport r = check_binding(build(meta.config), store);
  EXPECT_TRUE(r.unbound.empty());
  EXPECT_TRUE(r.mismatched.empty());
  EXPECT_TRUE(r.unused.empty());
}

TEST(Fixture, EveryTapWithinTolerance) {
  const ConformanceReport report = check_fixture(kGolden);
  ASSERT_FALSE(report.checks.empty());
  for (const TapCheck& c : report.checks) {
    EXPECT_TRUE(c.pass) << c.name << " diff " << c.max_abs_diff;
    EXPECT_LE(c.max_abs_diff, 1e-4) << c.name;
  }
}

TEST(Fixture, ProbabilityMatchesThroughPredictor) {
  const FixtureMeta meta = read_fixture_meta(kGolden);
  auto store = std::make_shared<const WeightStore>(read_file(kGolden / "weights.lfdw"));
  Predictor predictor(store, meta.config);
  const ProbMap p = predictor.predict(read_png_rgb(kGolden / "image.png"), Exec{2});
  const Tensor want = read_file(kGolden / "taps.lfdw").tensor("prob");
  EXPECT_LE(max_abs_diff(Tensor({1, 1, p.h, p.w}, p.values), want), 1e-4f);
}

TEST(Fixture, MissingOrBrokenDirectoryIsDataError) {
  const fs::path dir = fs::temp_directory_path() / "roadseg_broken_fixture";
  fs::create_directories(dir);
  EXPECT_THROW(read_fixture_meta(dir), DataError);
  std::ofstream(dir / "fixture.json") << "{\"format\": 1, \"variant\": \"nope\"}";
  EXPECT_THROW(read_fixture_meta(dir), DataError);
  fs::remove_all(dir);
}

TEST(Fixture, PerturbedWeightsAreDetected) {
  const fs::path dir = fs::temp_directory_path() / "roadseg_perturbed_fixture";
  fs::remove_all(dir);
  fs::copy(kGolden, dir);
  WeightStore original = read_file(kGolden / "weights.lfdw");
  WeightStore changed;
  for (const auto& e : original.entries()) {
    auto data = e.data;
    if (e.name == "head.cls.bias") data[1] += 0.01f;
    changed.add(e.name, e.dims, data);
  }
  write_file(changed, dir / "weights.lfdw");
  const ConformanceReport report = check_fixture(dir);
  EXPECT_FALSE(report.pass());
  fs::remove_all(dir);
}

}  // namespace
}  // namespace roadseg
