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

#include "roadseg/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "roadseg/conformance.hpp"
#include "roadseg/graph.hpp"
#include "roadseg/kernels.hpp"
#include "roadseg/metrics.hpp"
#include "roadseg/reference.hpp"
#include "roadseg/weights.hpp"

namespace roadseg {

namespace {

constexpr double kKernelTol = 1e-5;

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Tensor random_tensor(Rng& rng, Shape s) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(s.numel());
  for (auto& x : v) x = dist(rng);
  return Tensor(s, std::move(v));
}

void record(OracleSuite& suite, double diff, const std::string& what) {
  ++suite.instances;
  suite.max_abs_diff = std::max(suite.max_abs_diff, diff);
  if (!(diff <= kKernelTol)) {
    if (suite.failures++ == 0) suite.first_failure = fmt::format("{}: diff {:.3g}", what, diff);
  }
}

void conv_instance(Rng& rng, OracleSuite& suite) {
  for (;;) {
    const int n = uniform_int(rng, 1, 2);
    const int h = uniform_int(rng, 1, 16);
    const int w = uniform_int(rng, 1, 16);
    ConvSpec spec;
    spec.kernel = {uniform_int(rng, 1, 5), uniform_int(rng, 1, 5)};
    spec.stride = {uniform_int(rng, 1, 2), uniform_int(rng, 1, 2)};
    spec.padding = {uniform_int(rng, 0, 2), uniform_int(rng, 0, 2)};
    spec.dilation = {uniform_int(rng, 1, 2), uniform_int(rng, 1, 2)};
    spec.bias = uniform_int(rng, 0, 1) == 1;
    int cin = uniform_int(rng, 1, 8);
    int cout = uniform_int(rng, 1, 8);
    switch (uniform_int(rng, 0, 2)) {
      case 0: spec.groups = 1; break;
      case 1: spec.groups = cin; cout = cin * uniform_int(rng, 1, 2); break;  // depthwise
      default:
        cin = 2 * uniform_int(rng, 1, 4);
        cout = 2 * uniform_int(rng, 1, 4);
        spec.groups = 2;
    }
    if (cout > 8) cout = cin;
    if (conv_out_dim(h, spec.kernel.h, spec.stride.h, spec.padding.h, spec.dilation.h) < 1 ||
        conv_out_dim(w, spec.kernel.w, spec.stride.w, spec.padding.w, spec.dilation.w) < 1) {
      continue;
    }
    const Tensor x = random_tensor(rng, {n, cin, h, w});
    const Tensor k = random_tensor(rng, {cout, cin / spec.groups, spec.kernel.h, spec.kernel.w});
    const Tensor b = random_tensor(rng, {1, 1, 1, cout});
    std::optional<std::span<const float>> bias;
    if (spec.bias) bias = b.data();
    const Tensor got = conv2d(x, k, bias, spec, Exec{uniform_int(rng, 1, 4)});
    const Tensor want = reference::conv2d(x, k, spec.bias ? b.data() : std::span<const float>{}, spec);
    record(suite, max_abs_diff(got, want),
           fmt::format("conv {} k{}x{} s{}x{} g{}", to_string(x.shape()), spec.kernel.h,
                       spec.kernel.w, spec.stride.h, spec.stride.w, spec.groups));
    return;
  }
}

void pool_instance(Rng& rng, OracleSuite& suite) {
  PoolSpec spec;
  spec.kernel = {uniform_int(rng, 1, 3), uniform_int(rng, 1, 3)};
  spec.stride = {uniform_int(rng, 1, 2), uniform_int(rng, 1, 2)};
  spec.padding = {uniform_int(rng, 0, spec.kernel.h / 2), uniform_int(rng, 0, spec.kernel.w / 2)};
  const int h = uniform_int(rng, spec.kernel.h, 16);
  const int w = uniform_int(rng, spec.kernel.w, 16);
  const Tensor x = random_tensor(rng, {uniform_int(rng, 1, 2), uniform_int(rng, 1, 8), h, w});
  const Tensor got = maxpool2d(x, spec, Exec{uniform_int(rng, 1, 4)});
  record(suite, max_abs_diff(got, reference::maxpool2d(x, spec)),
         fmt::format("maxpool {}", to_string(x.shape())));
}

void resize_instance(Rng& rng, OracleSuite& suite) {
  const Tensor x = random_tensor(
      rng, {uniform_int(rng, 1, 2), uniform_int(rng, 1, 8), uniform_int(rng, 1, 16),
            uniform_int(rng, 1, 16)});
  const int oh = uniform_int(rng, 1, 16);
  const int ow = uniform_int(rng, 1, 16);
  const Tensor got = bilinear_resize(x, oh, ow, Exec{uniform_int(rng, 1, 4)});
  record(suite, max_abs_diff(got, reference::bilinear_resize(x, oh, ow)),
         fmt::format("resize {} -> {}x{}", to_string(x.shape()), oh, ow));
}

// Probabilities drawn from a mix that lands exactly on sweep thresholds often.
float random_prob(Rng& rng, int n) {
  switch (uniform_int(rng, 0, 3)) {
    case 0: return static_cast<float>(uniform_int(rng, 0, n)) / static_cast<float>(n);
    case 1: return static_cast<float>(uniform_int(rng, 0, 1));
    default: return std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
  }
}

}  // namespace

OracleSuite kernel_oracle_suite(std::uint64_t seed, int count) {
  Rng rng(seed);
  OracleSuite suite;
  for (int i = 0; i < count; ++i) {
    const int pick = i % 5;
    if (pick < 3) conv_instance(rng, suite);
    else if (pick == 3) pool_instance(rng, suite);
    else resize_instance(rng, suite);
  }
  return suite;
}

OracleSuite metrics_oracle_suite(std::uint64_t seed, int count) {
  Rng rng(seed);
  OracleSuite suite;
  for (int i = 0; i < count; ++i) {
    const int n_thresholds = uniform_int(rng, 0, 3) == 0 ? uniform_int(rng, 1, 20) : 255;
    const int images = uniform_int(rng, 1, 5);
    std::vector<ProbMap> probs;
    std::vector<Mask> gts;
    const double road_rate = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (int m = 0; m < images; ++m) {
      const int h = uniform_int(rng, 1, 16);
      const int w = uniform_int(rng, 1, 16);
      ProbMap p{h, w, {}};
      Mask g{h, w, {}};
      for (int j = 0; j < h * w; ++j) {
        p.values.push_back(random_prob(rng, n_thresholds));
        g.values.push_back(std::bernoulli_distribution(road_rate)(rng) ? 1 : 0);
      }
      probs.push_back(std::move(p));
      gts.push_back(std::move(g));
    }
    const MaxFResult got = max_f(probs, gts, n_thresholds);
    const MaxFResult want = reference::max_f(probs, gts, n_thresholds);
    const double ap_got = average_precision(probs, gts, n_thresholds);
    const double ap_want = reference::average_precision(probs, gts, n_thresholds);
    ++suite.instances;
    const double diff = std::max({std::fabs(got.maxf - want.maxf),
                                  std::fabs(got.threshold - want.threshold),
                                  std::fabs(ap_got - ap_want)});
    suite.max_abs_diff = std::max(suite.max_abs_diff, diff);
    if (got.maxf != want.maxf || got.threshold != want.threshold || got.index != want.index ||
        ap_got != ap_want) {
      if (suite.failures++ == 0) {
        suite.first_failure =
            fmt::format("instance {}: maxf {} vs {}, tau {} vs {}, ap {} vs {}", i, got.maxf,
                        want.maxf, got.threshold, want.threshold, ap_got, ap_want);
      }
    }
  }
  return suite;
}

std::vector<SelftestCheck> run_selftest(const std::optional<std::filesystem::path>& fixtures,
                                        std::uint64_t seed) {
  std::vector<SelftestCheck> checks;

  const OracleSuite kernels = kernel_oracle_suite(seed, 200);
  checks.push_back({"kernels", "conv/pool/resize vs naive", kernels.pass(),
                    fmt::format("{} instances, max diff {:.3g}{}", kernels.instances,
                                kernels.max_abs_diff,
                                kernels.pass() ? "" : "; " + kernels.first_failure)});
  const OracleSuite metrics = metrics_oracle_suite(seed + 1, 100);
  checks.push_back({"metrics", "max_f/ap vs brute force", metrics.pass(),
                    fmt::format("{} instances{}", metrics.instances,
                                metrics.pass() ? "" : "; " + metrics.first_failure)});

  for (const auto& row : kPublishedParams) {
    const std::int64_t got = count_params(build(parse_variant(row.variant)));
    checks.push_back({"params", row.variant, got == row.params,
                      fmt::format("{} (expected {})", got, row.params)});
  }

  {
    const ModelGraph g = build(parse_variant("full"));
    const WeightStore store = synthesize_weights(g, seed);
    const std::vector<std::uint8_t> bytes = encode(store);
    const bool round_trip = decode(bytes) == store && encode(decode(bytes)) == bytes;
    checks.push_back({"format", "round trip", round_trip,
                      fmt::format("{} entries, {} bytes", store.size(), bytes.size())});
    std::vector<std::uint8_t> corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x10;
    bool detected = false;
    try {
      decode(corrupt);
    } catch (const FormatError& e) {
      detected = e.kind() == FormatErrorKind::kChecksum;
    }
    checks.push_back({"format", "bit flip detected", detected, "mid-payload flip"});
  }

  if (fixtures) {
    const ConformanceReport report = check_fixture(*fixtures);
    for (const TapCheck& c : report.checks) {
      checks.push_back({"golden", c.name, c.pass,
                        fmt::format("max diff {:.3g} (tol {:.0e}, |ref| <= {:.3g})",
                                    c.max_abs_diff, c.tolerance, c.max_abs_ref)});
    }
  }
  return checks;
}

}  // namespace roadseg
