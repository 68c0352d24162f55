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

#include "roadseg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "roadseg/error.hpp"

namespace roadseg {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a == 0) throw DataError(fmt::format("{}: no images", what));
  if (a != b) throw DataError(fmt::format("{}: {} predictions vs {} ground truths", what, a, b));
}

void check_dims(int h, int w, const Mask& gt, const char* what) {
  if (h != gt.h || w != gt.w) {
    throw DataError(fmt::format("{}: prediction {}x{} vs ground truth {}x{}", what, h, w, gt.h,
                                gt.w));
  }
}

}  // namespace

double Confusion::precision() const { return ratio(tp, tp + fp); }
double Confusion::recall() const { return ratio(tp, tp + fn); }
double Confusion::fpr() const { return ratio(fp, fp + tn); }
double Confusion::fnr() const { return ratio(fn, fn + tp); }
double Confusion::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}
double Confusion::iou_road() const { return ratio(tp, tp + fp + fn); }
double Confusion::iou_background() const { return ratio(tn, tn + fp + fn); }

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

Confusion confusion(const Mask& mask, const Mask& gt) {
  check_dims(mask.h, mask.w, gt, "confusion");
  Confusion c;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const bool pred = mask.values[i] != 0;
    const bool truth = gt.values[i] != 0;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ThresholdSweep::ThresholdSweep(std::span<const ProbMap> probs, std::span<const Mask> gts,
                               int n_thresholds)
    : n_(n_thresholds) {
  if (n_ < 1) throw DataError("threshold count must be >= 1");
  check_aligned(probs.size(), gts.size(), "threshold sweep");
  // hist[k + 1] counts pixels whose highest passed threshold index is k
  // (k = -1: p below every threshold, e.g. negative or NaN).
  std::vector<std::int64_t> pos(n_ + 2, 0), neg(n_ + 2, 0);
  std::int64_t total_pos = 0, total_neg = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const ProbMap& p = probs[i];
    const Mask& g = gts[i];
    check_dims(p.h, p.w, g, "threshold sweep");
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      const double v = p.values[j];
      int k = -1;
      if (v >= 0.0) {
        k = static_cast<int>(std::min(std::floor(v * n_), static_cast<double>(n_)));
        while (k < n_ && v >= threshold(k + 1)) ++k;
        while (k >= 0 && v < threshold(k)) --k;
      }
      if (g.values[j]) {
        ++pos[k + 1];
        ++total_pos;
      } else {
        ++neg[k + 1];
        ++total_neg;
      }
    }
  }
  counts_.resize(n_ + 1);
  std::int64_t tp = 0, fp = 0;
  for (int k = n_; k >= 0; --k) {
    tp += pos[k + 1];
    fp += neg[k + 1];
    counts_[k] = {tp, fp, total_neg - fp, total_pos - tp};
  }
}

MaxFResult max_f(const ThresholdSweep& sweep) {
  MaxFResult best;
  best.maxf = -1.0;
  for (int k = 0; k <= sweep.n_thresholds(); ++k) {
    const double f = sweep.at(k).f1();
    if (f > best.maxf) best = {f, sweep.threshold(k), k};
  }
  return best;
}

MaxFResult max_f(std::span<const ProbMap> probs, std::span<const Mask> gts, int n_thresholds) {
  return max_f(ThresholdSweep(probs, gts, n_thresholds));
}

double average_precision(const ThresholdSweep& sweep) {
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double level = i / 10.0;
    double best = 0.0;
    for (int k = 1; k <= sweep.n_thresholds(); ++k) {
      const Confusion& c = sweep.at(k);
      if (c.recall() >= level) best = std::max(best, c.precision());
    }
    sum += best;
  }
  return sum / 11.0;
}

double average_precision(std::span<const ProbMap> probs, std::span<const Mask> gts,
                         int n_thresholds) {
  return average_precision(ThresholdSweep(probs, gts, n_thresholds));
}

double miou(std::span<const Mask> masks, std::span<const Mask> gts) {
  check_aligned(masks.size(), gts.size(), "miou");
  Confusion pooled;
  for (std::size_t i = 0; i < masks.size(); ++i) pooled += confusion(masks[i], gts[i]);
  return pooled.miou();
}

double ohem_bce_sum(const ProbMap& probs, const Mask& gt, double lambda) {
  check_dims(probs.h, probs.w, gt, "ohem_bce");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DataError("ohem threshold must lie in [0, 1]");
  constexpr double kEps = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probs.values[i]), kEps, 1.0 - kEps);
    const double p_true = gt.values[i] ? p : 1.0 - p;
    if (p_true < lambda) sum += -std::log(p_true);
  }
  return sum;
}

double ohem_bce(const ProbMap& probs, const Mask& gt, double lambda) {
  if (probs.values.empty()) return 0.0;
  return ohem_bce_sum(probs, gt, lambda) / static_cast<double>(probs.values.size());
}

namespace {

MetricRecord summarize(std::string name, std::span<const ProbMap> probs, std::span<const Mask> gts,
                       int n_thresholds, double lambda) {
  const ThresholdSweep sweep(probs, gts, n_thresholds);
  const MaxFResult mf = max_f(sweep);
  const Confusion& at_best = sweep.at(mf.index);
  MetricRecord r;
  r.name = std::move(name);
  r.maxf = mf.maxf;
  r.best_threshold = mf.threshold;
  r.ap = average_precision(sweep);
  r.pre = at_best.precision();
  r.rec = at_best.recall();
  r.fpr = at_best.fpr();
  r.fnr = at_best.fnr();
  r.miou = at_best.miou();
  double loss = 0.0;
  std::int64_t pixels = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    loss += ohem_bce_sum(probs[i], gts[i], lambda);
    pixels += static_cast<std::int64_t>(probs[i].values.size());
  }
  r.ohem_loss = pixels ? loss / static_cast<double>(pixels) : 0.0;
  return r;
}

std::string json_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          out += fmt::format("\\u{:04x}", static_cast<int>(ch));
        } else {
          out += ch;
        }
    }
  }
  return out;
}

std::string record_json(const MetricRecord& r, std::string_view indent, bool with_name) {
  std::string out = "{\n";
  if (with_name) out += fmt::format("{}  \"name\": \"{}\",\n", indent, json_escape(r.name));
  const std::pair<const char*, double> fields[] = {
      {"maxf", r.maxf}, {"best_threshold", r.best_threshold},
      {"ap", r.ap},     {"pre", r.pre},
      {"rec", r.rec},   {"fpr", r.fpr},
      {"fnr", r.fnr},   {"miou", r.miou},
      {"ohem_loss", r.ohem_loss},
  };
  for (std::size_t i = 0; i < std::size(fields); ++i) {
    out += fmt::format("{}  \"{}\": {:.6f}{}\n", indent, fields[i].first, fields[i].second,
                       i + 1 < std::size(fields) ? "," : "");
  }
  out += fmt::format("{}}}", indent);
  return out;
}

}  // namespace

EvalReport evaluate(std::span<const std::string> names, std::span<const ProbMap> probs,
                    std::span<const Mask> gts, int n_thresholds, double ohem_lambda) {
  check_aligned(probs.size(), gts.size(), "evaluate");
  if (names.size() != probs.size()) throw DataError("evaluate: names and predictions differ");
  EvalReport report;
  report.n_thresholds = n_thresholds;
  report.ohem_lambda = ohem_lambda;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    report.images.push_back(
        summarize(names[i], probs.subspan(i, 1), gts.subspan(i, 1), n_thresholds, ohem_lambda));
  }
  report.aggregate = summarize("aggregate", probs, gts, n_thresholds, ohem_lambda);
  return report;
}

std::string to_json(const EvalReport& report) {
  std::string out = "{\n";
  out += fmt::format("  \"variant\": \"{}\",\n", json_escape(report.variant));
  out += "  \"ap_definition\": \"ap_11pt\",\n";
  out += "  \"space\": \"image\",\n";
  out += fmt::format("  \"n_thresholds\": {},\n", report.n_thresholds);
  out += fmt::format("  \"ohem_lambda\": {:.6f},\n", report.ohem_lambda);
  out += fmt::format("  \"image_count\": {},\n", report.images.size());
  out += "  \"aggregate\": " + record_json(report.aggregate, "  ", false) + ",\n";
  out += "  \"images\": [";
  for (std::size_t i = 0; i < report.images.size(); ++i) {
    out += i ? ",\n    " : "\n    ";
    out += record_json(report.images[i], "    ", true);
  }
  out += report.images.empty() ? "]\n" : "\n  ]\n";
  out += "}\n";
  return out;
}

}  // namespace roadseg
