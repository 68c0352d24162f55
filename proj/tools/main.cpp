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

// roadseg command-line tool: analyze, infer, eval, bench, selftest, manifest.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 conformance failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "roadseg/conformance.hpp"
#include "roadseg/error.hpp"
#include "roadseg/executor.hpp"
#include "roadseg/graph.hpp"
#include "roadseg/image.hpp"
#include "roadseg/metrics.hpp"
#include "roadseg/pipeline.hpp"
#include "roadseg/selftest.hpp"
#include "roadseg/weights.hpp"

namespace fs = std::filesystem;
using namespace roadseg;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kConformanceFailure = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string weights;
  std::string variant = "full";
  std::string size;
  std::string csb_ratio = "2x4";
  std::string image;
  std::string images_dir;
  std::string masks_dir;
  std::string out;
  std::string overlay;
  std::string prob_out;
  std::string report;
  std::string fixtures;
  float threshold = 0.5f;
  int threads = 1;
  std::vector<int> thread_counts;
  int iterations = 1000;
  int warmup = 50;
  int n_thresholds = 255;
  double ohem_lambda = 0.7;
};

Pair2 parse_pair(const std::string& text, const char* flag) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw ConfigError(fmt::format("{} expects AxB, got '{}'", flag, text));
  }
  const Pair2 p{std::stoi(m[1]), std::stoi(m[2])};
  if (p.h < 1 || p.w < 1) throw ConfigError(fmt::format("{} values must be >= 1", flag));
  return p;
}

VariantConfig variant_config(const RunConfig& rc) {
  VariantConfig cfg;
  try {
    cfg = parse_variant(rc.variant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!rc.size.empty()) cfg.input_hw = parse_pair(rc.size, "--size");
  cfg.csb_ratio = parse_pair(rc.csb_ratio, "--csb-ratio");
  return cfg;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  if (!fs::is_regular_file(path)) throw ConfigError(fmt::format("{} '{}' is not a file", flag, path));
}

void require_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(fmt::format("{} is required", flag));
  if (!fs::is_directory(path)) {
    throw ConfigError(fmt::format("{} '{}' is not a directory", flag, path));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
}

ModelGraph build_checked(const VariantConfig& cfg) {
  try {
    return build(cfg);
  } catch (const GraphError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_analyze(const RunConfig& rc) {
  const ModelGraph g = build_checked(variant_config(rc));
  const VariantConfig& cfg = g.config();
  const std::int64_t params = count_params(g);
  const std::int64_t macs = count_macs(g);

  fmt::print("variant      {}\n", variant_name(cfg));
  fmt::print("input        {}x{}\n", cfg.input_hw.h, cfg.input_hw.w);
  fmt::print("csb ratio    {}x{}\n", cfg.csb_ratio.h, cfg.csb_ratio.w);
  fmt::print("params       {}\n", params);
  fmt::print("macs         {} ({:.3f} G)\n", macs, macs / 1e9);
  fmt::print("\n{:<10} {:>12} {:>16}\n", "branch", "params", "macs");
  const auto branches = cost_breakdown(g);
  for (const auto& b : branches) {
    fmt::print("{:<10} {:>12} {:>16}\n", b.branch, b.params, b.macs);
  }

  std::vector<std::pair<std::string, ReceptiveField>> fields;
  for (std::string_view tap : {taps::kF1High, taps::kF2Low, taps::kFaLow}) {
    if (g.find(tap)) fields.emplace_back(std::string(tap), receptive_field(g, tap));
  }
  if (cfg.variant == Variant::kStageProbe) {
    const std::string name = fmt::format("stage{}.out", cfg.stage);
    fields.emplace_back(name, receptive_field(g, name));
  }
  if (!fields.empty()) fmt::print("\n{:<12} {:>12} {:>8}\n", "feature", "rf (hxw)", "jump");
  for (const auto& [name, rf] : fields) {
    fmt::print("{:<12} {:>12} {:>8}\n", name, fmt::format("{}x{}", rf.rf_h, rf.rf_w),
               fmt::format("{}x{}", rf.jump_h, rf.jump_w));
  }

  if (!rc.report.empty()) {
    std::string json = "{\n";
    json += fmt::format("  \"variant\": \"{}\",\n", variant_name(cfg));
    json += fmt::format("  \"input_hw\": [{}, {}],\n", cfg.input_hw.h, cfg.input_hw.w);
    json += fmt::format("  \"csb_ratio\": [{}, {}],\n", cfg.csb_ratio.h, cfg.csb_ratio.w);
    json += fmt::format("  \"params\": {},\n", params);
    json += fmt::format("  \"macs\": {},\n", macs);
    json += fmt::format("  \"gmacs\": {:.6f},\n", macs / 1e9);
    json += "  \"branches\": [";
    for (std::size_t i = 0; i < branches.size(); ++i) {
      json += fmt::format("{}\n    {{\"branch\": \"{}\", \"params\": {}, \"macs\": {}}}",
                          i ? "," : "", branches[i].branch, branches[i].params, branches[i].macs);
    }
    json += "\n  ],\n  \"receptive_fields\": {";
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& [name, rf] = fields[i];
      json += fmt::format("{}\n    \"{}\": {{\"rf_h\": {}, \"rf_w\": {}, \"jump_h\": {}, \"jump_w\": {}}}",
                          i ? "," : "", name, rf.rf_h, rf.rf_w, rf.jump_h, rf.jump_w);
    }
    json += fields.empty() ? "}\n}\n" : "\n  }\n}\n";
    write_text(rc.report, json);
  }
  return kOk;
}

std::shared_ptr<const WeightStore> load_weights(const std::string& path) {
  return std::make_shared<const WeightStore>(read_file(path));
}

int cmd_infer(const RunConfig& rc) {
  require_file(rc.weights, "--weights");
  require_file(rc.image, "--image");
  if (rc.out.empty()) throw ConfigError("--out is required");
  if (!(rc.threshold >= 0.0f && rc.threshold <= 1.0f)) {
    throw ConfigError("--threshold must lie in [0, 1]");
  }
  const VariantConfig cfg = variant_config(rc);
  const ImageBuffer image = read_png_rgb(rc.image);
  if (!rc.size.empty() && (image.h != cfg.input_hw.h || image.w != cfg.input_hw.w)) {
    throw DataError(fmt::format("image is {}x{}, --size is {}x{}", image.h, image.w,
                                cfg.input_hw.h, cfg.input_hw.w));
  }
  Predictor predictor(load_weights(rc.weights), cfg);
  const ProbMap probs = predictor.predict(image, Exec{rc.threads});
  const Mask mask = to_mask(probs, rc.threshold);
  write_png_gray(rc.out, mask_to_gray(mask));
  if (!rc.overlay.empty()) write_png_rgb(rc.overlay, overlay(image, mask));
  if (!rc.prob_out.empty()) write_png_gray(rc.prob_out, prob_to_gray16(probs));
  const auto road = std::count(mask.values.begin(), mask.values.end(), 1);
  fmt::print("{}: {}x{}, road pixels {} ({:.2f}%) at threshold {:.6f}\n", rc.image, image.w,
             image.h, road, 100.0 * road / static_cast<double>(mask.values.size()), rc.threshold);
  return kOk;
}

std::map<std::string, fs::path> png_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

int cmd_eval(const RunConfig& rc) {
  require_file(rc.weights, "--weights");
  require_dir(rc.images_dir, "--images");
  require_dir(rc.masks_dir, "--masks");
  if (rc.n_thresholds < 1) throw ConfigError("--n-thresholds must be >= 1");
  if (!(rc.ohem_lambda >= 0.0 && rc.ohem_lambda <= 1.0)) {
    throw ConfigError("--ohem-lambda must lie in [0, 1]");
  }
  const VariantConfig cfg = variant_config(rc);
  const auto images = png_by_stem(rc.images_dir);
  const auto masks = png_by_stem(rc.masks_dir);

  std::vector<std::string> unmatched;
  for (const auto& [stem, path] : images) {
    if (!masks.count(stem)) unmatched.push_back(stem + " (no mask)");
  }
  for (const auto& [stem, path] : masks) {
    if (!images.count(stem)) unmatched.push_back(stem + " (no image)");
  }
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& s : unmatched) list += "\n  " + s;
    throw DataError(fmt::format("{} unmatched stem(s):{}", unmatched.size(), list));
  }
  if (images.empty()) throw DataError(fmt::format("no PNG images in {}", rc.images_dir));

  Predictor predictor(load_weights(rc.weights), cfg);
  std::vector<std::string> names;
  std::vector<ProbMap> probs;
  std::vector<Mask> gts;
  for (const auto& [stem, path] : images) {  // std::map keeps filename order
    const ImageBuffer image = read_png_rgb(path);
    Mask gt = mask_from_gray(read_png_gray(masks.at(stem)));
    if (gt.h != image.h || gt.w != image.w) {
      throw DataError(fmt::format("{}: image {}x{} vs mask {}x{}", stem, image.w, image.h, gt.w,
                                  gt.h));
    }
    names.push_back(stem);
    probs.push_back(predictor.predict(image, Exec{rc.threads}));
    gts.push_back(std::move(gt));
  }
  EvalReport report = evaluate(names, probs, gts, rc.n_thresholds, rc.ohem_lambda);
  report.variant = variant_name(cfg);
  const std::string json = to_json(report);
  if (rc.report.empty()) {
    fmt::print("{}", json);
  } else {
    write_text(rc.report, json);
    const MetricRecord& a = report.aggregate;
    fmt::print("{} images: MaxF {:.6f} at {:.6f}, AP {:.6f}, mIoU {:.6f}\n", names.size(), a.maxf,
               a.best_threshold, a.ap, a.miou);
  }
  return kOk;
}

int cmd_bench(const RunConfig& rc) {
  if (rc.iterations < 1) throw ConfigError("--iterations must be >= 1");
  if (rc.warmup < 0) throw ConfigError("--warmup must be >= 0");
  const VariantConfig cfg = variant_config(rc);
  ModelGraph graph = build_checked(cfg);
  WeightStore store;
  if (rc.weights.empty()) {
    store = synthesize_weights(graph, 1);
    fmt::print("no --weights given, using synthetic weights\n");
  } else {
    require_file(rc.weights, "--weights");
    store = read_file(rc.weights);
  }
  const BoundModel model = bind(std::move(graph), store);
  ImageBuffer image(cfg.input_hw.h, cfg.input_hw.w);
  for (std::size_t i = 0; i < image.rgb.size(); ++i) image.rgb[i] = static_cast<std::uint8_t>(i * 37 % 251);
  const Tensor input = preprocess(image, cfg);

  std::vector<int> counts = rc.thread_counts.empty() ? std::vector<int>{rc.threads} : rc.thread_counts;
  for (int t : counts) {
    if (t < 1) throw ConfigError("thread counts must be >= 1");
  }
  fmt::print("{} {}x{}, {} iterations after {} warmup\n", variant_name(cfg), cfg.input_hw.h,
             cfg.input_hw.w, rc.iterations, rc.warmup);
  fmt::print("{:>8} {:>12} {:>12} {:>12} {:>12}\n", "threads", "mean ms", "p50 ms", "p95 ms",
             "fps");
  for (int t : counts) {
    ForwardOptions opts;
    opts.exec = Exec{t};
    for (int i = 0; i < rc.warmup; ++i) forward(model, input, opts);
    std::vector<double> ms;
    ms.reserve(rc.iterations);
    for (int i = 0; i < rc.iterations; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      forward(model, input, opts);
      const auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
    std::sort(ms.begin(), ms.end());
    auto pct = [&](double q) {
      return ms[std::min(ms.size() - 1, static_cast<std::size_t>(q * (ms.size() - 1) + 0.5))];
    };
    fmt::print("{:>8} {:>12.3f} {:>12.3f} {:>12.3f} {:>12.3f}\n", t, mean, pct(0.5), pct(0.95),
               1000.0 / mean);
  }
  return kOk;
}

int cmd_selftest(const RunConfig& rc) {
  std::optional<fs::path> fixtures;
  if (!rc.fixtures.empty()) {
    require_dir(rc.fixtures, "--fixtures");
    fixtures = rc.fixtures;
  }
  const auto checks = run_selftest(fixtures);
  int failed = 0;
  for (const auto& c : checks) {
    fmt::print("{} {:<8} {:<28} {}\n", c.pass ? "PASS" : "FAIL", c.group, c.name, c.detail);
    failed += !c.pass;
  }
  if (!fixtures) fmt::print("SKIP golden   (no --fixtures given)\n");
  fmt::print("{} of {} checks passed\n", checks.size() - failed, checks.size());
  return failed ? kConformanceFailure : kOk;
}

int cmd_manifest(const RunConfig& rc) {
  const std::string text = manifest(build_checked(variant_config(rc)));
  if (rc.out.empty()) {
    fmt::print("{}", text);
  } else {
    write_text(rc.out, text);
  }
  return kOk;
}

int default_threads() {
  const char* env = std::getenv("LFD_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) {
    throw ConfigError(fmt::format("LFD_THREADS must be a positive integer, got '{}'", env));
  }
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;
  try {
    rc.threads = default_threads();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  CLI::App app{"roadseg: CPU road-segmentation inference and analysis"};
  app.require_subcommand(1);

  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--variant", rc.variant, "Model variant")
        ->check(CLI::IsMember(all_variant_names()));
    cmd->add_option("--size", rc.size, "Input size HxW (default 375x1240)");
    cmd->add_option("--csb-ratio", rc.csb_ratio, "Context-branch downsample RVxRH")
        ->capture_default_str();
  };
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", rc.threads, "Worker threads (default $LFD_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  };

  auto* analyze = app.add_subcommand("analyze", "Parameters, MACs and receptive fields");
  add_model(analyze);
  analyze->add_option("--report", rc.report, "Write a JSON report");

  auto* infer = app.add_subcommand("infer", "Segment one image");
  add_model(infer);
  add_threads(infer);
  infer->add_option("--weights", rc.weights, "Weight file (.lfdw)")->required();
  infer->add_option("--image", rc.image, "Input PNG")->required();
  infer->add_option("--out", rc.out, "Output mask PNG")->required();
  infer->add_option("--overlay", rc.overlay, "Optional overlay PNG");
  infer->add_option("--prob", rc.prob_out, "Optional 16-bit probability PNG");
  infer->add_option("--threshold", rc.threshold, "Road threshold")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Evaluate on an image/mask directory pair");
  add_model(eval);
  add_threads(eval);
  eval->add_option("--weights", rc.weights, "Weight file (.lfdw)")->required();
  eval->add_option("--images", rc.images_dir, "Directory of input PNGs")->required();
  eval->add_option("--masks", rc.masks_dir, "Directory of ground-truth PNGs")->required();
  eval->add_option("--report", rc.report, "Report path (stdout if omitted)");
  eval->add_option("--n-thresholds", rc.n_thresholds, "Threshold sweep resolution")
      ->capture_default_str();
  eval->add_option("--ohem-lambda", rc.ohem_lambda, "Hard-example threshold")
      ->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Forward-pass latency");
  add_model(bench);
  add_threads(bench);
  bench->add_option("--weights", rc.weights, "Weight file (synthetic if omitted)");
  bench->add_option("--thread-counts", rc.thread_counts, "Thread counts to sweep, e.g. 1,2,4")
      ->delimiter(',');
  bench->add_option("--iterations", rc.iterations, "Timed forwards")->capture_default_str();
  bench->add_option("--warmup", rc.warmup, "Untimed forwards")->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "Oracles, parameter table, codec, fixtures");
  selftest->add_option("--fixtures", rc.fixtures, "Golden fixture directory");

  auto* manifest_cmd = app.add_subcommand("manifest", "Print the weight-slot manifest");
  add_model(manifest_cmd);
  manifest_cmd->add_option("--out", rc.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*analyze) return cmd_analyze(rc);
    if (*infer) return cmd_infer(rc);
    if (*eval) return cmd_eval(rc);
    if (*bench) return cmd_bench(rc);
    if (*selftest) return cmd_selftest(rc);
    if (*manifest_cmd) return cmd_manifest(rc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const BindError& e) {
    std::cerr << "weight error: " << e.what() << "\n";
    return kDataError;
  } catch (const FormatError& e) {
    std::cerr << "weight file error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kConfigError;
}
