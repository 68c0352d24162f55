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
#include <span>
#include <string>
#include <vector>

#include "roadseg/pipeline.hpp"

namespace roadseg {

// Pixel counts of a binary prediction against ground truth. Every rate with
// an empty denominator is 0.
struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  double precision() const;
  double recall() const;
  double fpr() const;
  double fnr() const;
  double f1() const;
  double iou_road() const;
  double iou_background() const;
  double miou() const { return 0.5 * (iou_road() + iou_background()); }

  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion&) const = default;
};

Confusion confusion(const Mask& mask, const Mask& gt);

// Pooled confusion counts at thresholds k / n, k = 0..n; a pixel is road at
// threshold t when p >= t.
class ThresholdSweep {
 public:
  ThresholdSweep(std::span<const ProbMap> probs, std::span<const Mask> gts, int n_thresholds = 255);

  int n_thresholds() const { return n_; }
  double threshold(int k) const { return static_cast<double>(k) / n_; }
  const Confusion& at(int k) const { return counts_.at(k); }

 private:
  int n_;
  std::vector<Confusion> counts_;
};

struct MaxFResult {
  double maxf = 0.0;
  double threshold = 0.0;
  int index = 0;  // k of the lowest threshold attaining maxf
};

MaxFResult max_f(const ThresholdSweep& sweep);
MaxFResult max_f(std::span<const ProbMap> probs, std::span<const Mask> gts, int n_thresholds = 255);

// 11-point interpolated AP: mean over r in {0, 0.1, ..., 1} of the best
// precision among thresholds with recall >= r (0 if none). The sweep uses the
// strictly positive thresholds k = 1..n, so an all-zero prediction scores 0.
double average_precision(const ThresholdSweep& sweep);
double average_precision(std::span<const ProbMap> probs, std::span<const Mask> gts,
                         int n_thresholds = 255);

// Mean of road and background IoU over pooled counts.
double miou(std::span<const Mask> masks, std::span<const Mask> gts);

// Online-hard-example BCE: sum over pixels whose true-class confidence is
// below `lambda` of -log(true-class confidence), divided by the pixel count.
// Probabilities are clamped to [1e-7, 1 - 1e-7].
double ohem_bce(const ProbMap& probs, const Mask& gt, double lambda);
// Numerator of ohem_bce.
double ohem_bce_sum(const ProbMap& probs, const Mask& gt, double lambda);

struct MetricRecord {
  std::string name;
  double maxf = 0.0;
  double best_threshold = 0.0;
  double ap = 0.0;
  double pre = 0.0;
  double rec = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double miou = 0.0;
  double ohem_loss = 0.0;
};

struct EvalReport {
  std::string variant;
  int n_thresholds = 255;
  double ohem_lambda = 0.7;
  MetricRecord aggregate;
  std::vector<MetricRecord> images;
};

// PRE/REC/FPR/FNR/mIoU are reported at the MaxF threshold. The aggregate
// pools counts over all images.
EvalReport evaluate(std::span<const std::string> names, std::span<const ProbMap> probs,
                    std::span<const Mask> gts, int n_thresholds = 255, double ohem_lambda = 0.7);

// Stable JSON document; every float printed with 6 decimals.
std::string to_json(const EvalReport& report);

}  // namespace roadseg
