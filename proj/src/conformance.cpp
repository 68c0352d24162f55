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

#include "roadseg/conformance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "roadseg/error.hpp"
#include "roadseg/executor.hpp"
#include "roadseg/image.hpp"
#include "roadseg/pipeline.hpp"

namespace roadseg {

namespace fs = std::filesystem;

bool ConformanceReport::pass() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const TapCheck& c) { return c.pass; });
}

FixtureMeta read_fixture_meta(const fs::path& dir) {
  const fs::path path = dir / "fixture.json";
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<int>() != 1) {
      throw DataError(fmt::format("{}: unsupported fixture format", path.string()));
    }
    FixtureMeta meta;
    meta.config = parse_variant(j.at("variant").get<std::string>());
    meta.config.input_hw = {j.at("input_hw").at(0).get<int>(), j.at("input_hw").at(1).get<int>()};
    if (j.contains("csb_ratio")) {
      meta.config.csb_ratio = {j["csb_ratio"].at(0).get<int>(), j["csb_ratio"].at(1).get<int>()};
    }
    meta.tolerance = j.value("tolerance", 1e-4);
    meta.taps = j.at("taps").get<std::vector<std::string>>();
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const std::invalid_argument& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

namespace {

TapCheck compare(const std::string& name, const Tensor& got, const Tensor& want, double tol) {
  TapCheck c;
  c.name = name;
  c.shape = want.shape();
  c.tolerance = tol;
  if (got.shape() != want.shape()) {
    c.max_abs_diff = INFINITY;
    return c;
  }
  c.max_abs_diff = max_abs_diff(got, want);
  for (float v : want.data()) c.max_abs_ref = std::max(c.max_abs_ref, std::fabs(double{v}));
  c.pass = got.all_finite() && c.max_abs_diff <= tol;
  return c;
}

}  // namespace

ConformanceReport check_fixture(const fs::path& dir, Exec exec) {
  const FixtureMeta meta = read_fixture_meta(dir);
  const WeightStore weights = read_file(dir / "weights.lfdw");
  const WeightStore golden = read_file(dir / "taps.lfdw");
  const ImageBuffer image = read_png_rgb(dir / "image.png");

  const BoundModel model = bind(build(meta.config), weights);
  const Tensor input = preprocess(image, meta.config);

  ForwardOptions opts;
  opts.exec = exec;
  for (const auto& t : meta.taps) {
    if (t != "prob" && t != taps::kInput) opts.capture.push_back(t);
  }
  const ForwardResult result = forward(model, input, opts);

  ConformanceReport report;
  for (const auto& t : meta.taps) {
    if (!golden.contains(t)) throw DataError(fmt::format("taps.lfdw has no entry '{}'", t));
    const Tensor want = golden.tensor(t);
    if (t == taps::kInput) {
      report.checks.push_back(compare(t, input, want, meta.tolerance));
    } else if (t == "prob") {
      const ProbMap p = road_probability(result.output, exec);
      report.checks.push_back(
          compare(t, Tensor({1, 1, p.h, p.w}, p.values), want, meta.tolerance));
    } else {
      report.checks.push_back(compare(t, result.tap(t), want, meta.tolerance));
    }
  }
  return report;
}

}  // namespace roadseg
