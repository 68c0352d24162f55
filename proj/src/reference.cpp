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

#include "roadseg/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roadseg::reference {

Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
              const ConvSpec& spec) {
  const int groups = spec.groups;
  const int cout = weights.n();
  const int cin_g = input.c() / groups;
  const int cout_g = cout / groups;
  const Shape os = conv_output_shape(input.shape(), cout, spec);
  Tensor out(os);
  for (int n = 0; n < os.n; ++n) {
    for (int co = 0; co < cout; ++co) {
      const int g = co / cout_g;
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          double sum = 0.0;
          for (int ci = 0; ci < cin_g; ++ci) {
            for (int ky = 0; ky < spec.kernel.h; ++ky) {
              for (int kx = 0; kx < spec.kernel.w; ++kx) {
                const int iy = oy * spec.stride.h - spec.padding.h + ky * spec.dilation.h;
                const int ix = ox * spec.stride.w - spec.padding.w + kx * spec.dilation.w;
                if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
                sum += double{input.at(n, g * cin_g + ci, iy, ix)} * weights.at(co, ci, ky, kx);
              }
            }
          }
          out.at(n, co, oy, ox) = static_cast<float>(sum + (bias.empty() ? 0.0 : double{bias[co]}));
        }
      }
    }
  }
  return out;
}

Tensor maxpool2d(const Tensor& input, const PoolSpec& spec) {
  const Shape os = maxpool_output_shape(input.shape(), spec);
  Tensor out(os);
  for (int n = 0; n < os.n; ++n) {
    for (int c = 0; c < os.c; ++c) {
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          for (int ky = 0; ky < spec.kernel.h; ++ky) {
            for (int kx = 0; kx < spec.kernel.w; ++kx) {
              const int iy = oy * spec.stride.h - spec.padding.h + ky;
              const int ix = ox * spec.stride.w - spec.padding.w + kx;
              if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
              best = std::max(best, input.at(n, c, iy, ix));
            }
          }
          out.at(n, c, oy, ox) = best;
        }
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  Tensor out({input.n(), input.c(), out_h, out_w});
  auto source = [](int dst, int in, int out) {
    const double s = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (int n = 0; n < input.n(); ++n) {
    for (int c = 0; c < input.c(); ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        const double sy = source(oy, input.h(), out_h);
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, input.h() - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
          const double sx = source(ox, input.w(), out_w);
          const int x0 = static_cast<int>(std::floor(sx));
          const int x1 = std::min(x0 + 1, input.w() - 1);
          const double fx = sx - x0;
          const double top = (1 - fx) * input.at(n, c, y0, x0) + fx * input.at(n, c, y0, x1);
          const double bottom = (1 - fx) * input.at(n, c, y1, x0) + fx * input.at(n, c, y1, x1);
          out.at(n, c, oy, ox) = static_cast<float>((1 - fy) * top + fy * bottom);
        }
      }
    }
  }
  return out;
}

namespace {

struct Counts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts count_at(std::span<const ProbMap> probs, std::span<const Mask> gts, double t) {
  Counts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t j = 0; j < probs[i].values.size(); ++j) {
      const bool pred = static_cast<double>(probs[i].values[j]) >= t;
      const bool truth = gts[i].values[j] != 0;
      c.tp += pred && truth;
      c.fp += pred && !truth;
      c.fn += !pred && truth;
      c.tn += !pred && !truth;
    }
  }
  return c;
}

double safe_div(std::int64_t a, std::int64_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

MaxFResult max_f(std::span<const ProbMap> probs, std::span<const Mask> gts, int n_thresholds) {
  MaxFResult best{-1.0, 0.0, 0};
  for (int k = 0; k <= n_thresholds; ++k) {
    const double t = static_cast<double>(k) / n_thresholds;
    const Counts c = count_at(probs, gts, t);
    const double pre = safe_div(c.tp, c.tp + c.fp);
    const double rec = safe_div(c.tp, c.tp + c.fn);
    const double f = pre + rec == 0.0 ? 0.0 : 2.0 * pre * rec / (pre + rec);
    if (f > best.maxf) best = {f, t, k};
  }
  return best;
}

double average_precision(std::span<const ProbMap> probs, std::span<const Mask> gts,
                         int n_thresholds) {
  std::vector<double> pre, rec;
  for (int k = 1; k <= n_thresholds; ++k) {
    const Counts c = count_at(probs, gts, static_cast<double>(k) / n_thresholds);
    pre.push_back(safe_div(c.tp, c.tp + c.fp));
    rec.push_back(safe_div(c.tp, c.tp + c.fn));
  }
  double total = 0.0;
  for (int i = 0; i <= 10; ++i) {
    double best = 0.0;
    for (std::size_t k = 0; k < pre.size(); ++k) {
      if (rec[k] >= i / 10.0 && pre[k] > best) best = pre[k];
    }
    total += best;
  }
  return total / 11.0;
}

}  // namespace roadseg::reference
