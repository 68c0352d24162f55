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

#include "roadseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <fmt/format.h>
#include <omp.h>

#include "roadseg/error.hpp"

namespace roadseg {
namespace {

// Output pixels per conv work item. Fixed so the partition of work, and hence
// every floating-point summation order, is independent of the thread count.
constexpr int kTilePixels = 64;
constexpr int kStrip = 16;
constexpr int kRowBlock = 4;
constexpr std::size_t kElementwiseChunk = 1 << 14;

int clamp_threads(int t) { return std::max(1, t); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Geometry shared by every work item of one conv2d call.
struct ConvPlan {
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int groups, cin_g, cout_g;
  int kh, kw, sh, sw, ph, pw, dh, dw;
  int k_len;  // cin_g * kh * kw
  bool pointwise;
};

// acc[r][j] += sum_k w[r][k] * col[k * stride + j] for `rows` weight rows and
// `width` <= kStrip pixels. The k loop runs 0..K-1 in order for every output.
template <int Rows>
inline void micro_kernel(const float* w, int k_len, const float* col, std::size_t stride,
                         int width, float* out, std::size_t out_stride, const float* bias) {
  float acc[Rows][kStrip] = {};
  if (width == kStrip) {
    for (int k = 0; k < k_len; ++k) {
      const float* c = col + k * stride;
      for (int r = 0; r < Rows; ++r) {
        const float wv = w[static_cast<std::size_t>(r) * k_len + k];
        for (int j = 0; j < kStrip; ++j) acc[r][j] += wv * c[j];
      }
    }
  } else {
    for (int k = 0; k < k_len; ++k) {
      const float* c = col + k * stride;
      for (int r = 0; r < Rows; ++r) {
        const float wv = w[static_cast<std::size_t>(r) * k_len + k];
        for (int j = 0; j < width; ++j) acc[r][j] += wv * c[j];
      }
    }
  }
  for (int r = 0; r < Rows; ++r) {
    const float b = bias ? bias[r] : 0.0f;
    float* o = out + r * out_stride;
    for (int j = 0; j < width; ++j) o[j] = acc[r][j] + b;
  }
}

// Fills col[k][j] for pixels p0..p0+count of one image/group.
void im2col_tile(const ConvPlan& pl, const float* in_group, int p0, int count, float* col,
                 int* base_y, int* base_x) {
  for (int j = 0; j < count; ++j) {
    const int p = p0 + j;
    base_y[j] = (p / pl.out_w) * pl.sh - pl.ph;
    base_x[j] = (p % pl.out_w) * pl.sw - pl.pw;
  }
  const std::size_t plane = static_cast<std::size_t>(pl.in_h) * pl.in_w;
  int k = 0;
  for (int ci = 0; ci < pl.cin_g; ++ci) {
    const float* src = in_group + ci * plane;
    for (int ky = 0; ky < pl.kh; ++ky) {
      for (int kx = 0; kx < pl.kw; ++kx, ++k) {
        float* dst = col + static_cast<std::size_t>(k) * kTilePixels;
        const int oy = ky * pl.dh;
        const int ox = kx * pl.dw;
        for (int j = 0; j < count; ++j) {
          const int iy = base_y[j] + oy;
          const int ix = base_x[j] + ox;
          dst[j] = (iy >= 0 && iy < pl.in_h && ix >= 0 && ix < pl.in_w)
                       ? src[static_cast<std::size_t>(iy) * pl.in_w + ix]
                       : 0.0f;
        }
      }
    }
  }
}

void conv_gemm(const ConvPlan& pl, const Tensor& input, const Tensor& weights, const float* bias,
               Tensor& out, int threads) {
  const int n_batch = input.n();
  const int out_pixels = pl.out_h * pl.out_w;
  const int tiles = (out_pixels + kTilePixels - 1) / kTilePixels;
  const long total = static_cast<long>(n_batch) * pl.groups * tiles;
  const float* wdata = weights.data().data();

#pragma omp parallel num_threads(threads)
  {
    std::vector<float> col(pl.pointwise ? 0 : static_cast<std::size_t>(pl.k_len) * kTilePixels);
    std::vector<int> base_y(kTilePixels), base_x(kTilePixels);
#pragma omp for schedule(dynamic, 1)
    for (long task = 0; task < total; ++task) {
      const int tile = static_cast<int>(task % tiles);
      const int g = static_cast<int>((task / tiles) % pl.groups);
      const int n = static_cast<int>(task / (static_cast<long>(tiles) * pl.groups));
      const int p0 = tile * kTilePixels;
      const int count = std::min(kTilePixels, out_pixels - p0);

      const float* in_group = input.plane(n, g * pl.cin_g);
      const float* col_base;
      std::size_t col_stride;
      if (pl.pointwise) {
        col_base = in_group + p0;
        col_stride = static_cast<std::size_t>(out_pixels);
      } else {
        im2col_tile(pl, in_group, p0, count, col.data(), base_y.data(), base_x.data());
        col_base = col.data();
        col_stride = kTilePixels;
      }

      const std::size_t out_stride = static_cast<std::size_t>(out_pixels);
      int co = 0;
      for (; co + kRowBlock <= pl.cout_g; co += kRowBlock) {
        const int oc = g * pl.cout_g + co;
        const float* w = wdata + static_cast<std::size_t>(oc) * pl.k_len;
        const float* b = bias ? bias + oc : nullptr;
        for (int j0 = 0; j0 < count; j0 += kStrip) {
          micro_kernel<kRowBlock>(w, pl.k_len, col_base + j0, col_stride,
                                  std::min(kStrip, count - j0), out.plane(n, oc) + p0 + j0,
                                  out_stride, b);
        }
      }
      for (; co < pl.cout_g; ++co) {
        const int oc = g * pl.cout_g + co;
        const float* w = wdata + static_cast<std::size_t>(oc) * pl.k_len;
        const float* b = bias ? bias + oc : nullptr;
        for (int j0 = 0; j0 < count; j0 += kStrip) {
          micro_kernel<1>(w, pl.k_len, col_base + j0, col_stride, std::min(kStrip, count - j0),
                          out.plane(n, oc) + p0 + j0, out_stride, b);
        }
      }
    }
  }
}

// One filter per channel (groups == in_c == out_c).
void conv_depthwise(const ConvPlan& pl, const Tensor& input, const Tensor& weights,
                    const float* bias, Tensor& out, int threads) {
  const long planes = static_cast<long>(input.n()) * pl.in_c;
  const float* wdata = weights.data().data();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long idx = 0; idx < planes; ++idx) {
    const int n = static_cast<int>(idx / pl.in_c);
    const int c = static_cast<int>(idx % pl.in_c);
    const float* src = input.plane(n, c);
    const float* w = wdata + static_cast<std::size_t>(c) * pl.kh * pl.kw;
    const float b = bias ? bias[c] : 0.0f;
    float* dst = out.plane(n, c);
    for (int oy = 0; oy < pl.out_h; ++oy) {
      for (int ox = 0; ox < pl.out_w; ++ox) {
        float acc = 0.0f;
        for (int ky = 0; ky < pl.kh; ++ky) {
          const int iy = oy * pl.sh - pl.ph + ky * pl.dh;
          if (iy < 0 || iy >= pl.in_h) continue;
          const float* row = src + static_cast<std::size_t>(iy) * pl.in_w;
          for (int kx = 0; kx < pl.kw; ++kx) {
            const int ix = ox * pl.sw - pl.pw + kx * pl.dw;
            if (ix < 0 || ix >= pl.in_w) continue;
            acc += row[ix] * w[ky * pl.kw + kx];
          }
        }
        dst[static_cast<std::size_t>(oy) * pl.out_w + ox] = acc + b;
      }
    }
  }
}

template <typename F>
Tensor map_elementwise(const Tensor& input, Exec exec, F f) {
  Tensor out(input.shape());
  const float* src = input.data().data();
  float* dst = out.data().data();
  const std::size_t total = input.numel();
  const long chunks = static_cast<long>((total + kElementwiseChunk - 1) / kElementwiseChunk);
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long ch = 0; ch < chunks; ++ch) {
    const std::size_t begin = static_cast<std::size_t>(ch) * kElementwiseChunk;
    const std::size_t end = std::min(total, begin + kElementwiseChunk);
    for (std::size_t i = begin; i < end; ++i) dst[i] = f(src[i]);
  }
  return out;
}

}  // namespace

int conv_out_dim(int in, int kernel, int stride, int pad, int dilation) {
  const int span = in + 2 * pad - dilation * (kernel - 1) - 1;
  if (span < 0) return 0;
  return span / stride + 1;
}

Shape conv_output_shape(const Shape& in, int out_c, const ConvSpec& s) {
  require(s.kernel.h >= 1 && s.kernel.w >= 1, "conv kernel must be >= 1");
  require(s.stride.h >= 1 && s.stride.w >= 1, "conv stride must be >= 1");
  require(s.dilation.h >= 1 && s.dilation.w >= 1, "conv dilation must be >= 1");
  require(s.padding.h >= 0 && s.padding.w >= 0, "conv padding must be >= 0");
  require(s.groups >= 1, "conv groups must be >= 1");
  require(in.c % s.groups == 0,
          fmt::format("conv input channels {} not divisible by groups {}", in.c, s.groups));
  require(out_c % s.groups == 0,
          fmt::format("conv output channels {} not divisible by groups {}", out_c, s.groups));
  const int oh = conv_out_dim(in.h, s.kernel.h, s.stride.h, s.padding.h, s.dilation.h);
  const int ow = conv_out_dim(in.w, s.kernel.w, s.stride.w, s.padding.w, s.dilation.w);
  require(oh >= 1, fmt::format("conv output height {} < 1 for input height {}", oh, in.h));
  require(ow >= 1, fmt::format("conv output width {} < 1 for input width {}", ow, in.w));
  return {in.n, out_c, oh, ow};
}

Tensor conv2d(const Tensor& input, const Tensor& weights,
              std::optional<std::span<const float>> bias, const ConvSpec& spec, Exec exec) {
  const Shape& ws = weights.shape();
  require(ws.h == spec.kernel.h && ws.w == spec.kernel.w,
          fmt::format("conv weights kernel {}x{} does not match spec {}x{}", ws.h, ws.w,
                      spec.kernel.h, spec.kernel.w));
  require(spec.groups >= 1 && input.c() % spec.groups == 0,
          fmt::format("conv input channels {} not divisible by groups {}", input.c(), spec.groups));
  require(ws.c == input.c() / spec.groups,
          fmt::format("conv weights in-channels {} != input channels {} / groups {}", ws.c,
                      input.c(), spec.groups));
  const Shape os = conv_output_shape(input.shape(), ws.n, spec);
  if (bias) {
    require(bias->size() == static_cast<std::size_t>(ws.n),
            fmt::format("conv bias length {} != out channels {}", bias->size(), ws.n));
  }

  ConvPlan pl{};
  pl.in_c = input.c();
  pl.in_h = input.h();
  pl.in_w = input.w();
  pl.out_c = os.c;
  pl.out_h = os.h;
  pl.out_w = os.w;
  pl.groups = spec.groups;
  pl.cin_g = input.c() / spec.groups;
  pl.cout_g = os.c / spec.groups;
  pl.kh = spec.kernel.h;
  pl.kw = spec.kernel.w;
  pl.sh = spec.stride.h;
  pl.sw = spec.stride.w;
  pl.ph = spec.padding.h;
  pl.pw = spec.padding.w;
  pl.dh = spec.dilation.h;
  pl.dw = spec.dilation.w;
  pl.k_len = pl.cin_g * pl.kh * pl.kw;
  pl.pointwise = pl.kh == 1 && pl.kw == 1 && pl.sh == 1 && pl.sw == 1 && pl.ph == 0 &&
                 pl.pw == 0;

  Tensor out(os);
  if (os.numel() == 0) return out;
  const float* b = bias ? bias->data() : nullptr;
  const int threads = clamp_threads(exec.threads);
  if (pl.cin_g == 1 && pl.cout_g == 1) {
    conv_depthwise(pl, input, weights, b, out, threads);
  } else {
    conv_gemm(pl, input, weights, b, out, threads);
  }
  return out;
}

Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& p, Exec exec) {
  const auto c = static_cast<std::size_t>(input.c());
  require(p.gamma.size() == c && p.beta.size() == c && p.mean.size() == c && p.var.size() == c,
          fmt::format("batchnorm parameter lengths ({}, {}, {}, {}) != channels {}", p.gamma.size(),
                      p.beta.size(), p.mean.size(), p.var.size(), c));
  Tensor out(input.shape());
  const long planes = static_cast<long>(input.n()) * input.c();
  const std::size_t hw = input.shape().plane();
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long idx = 0; idx < planes; ++idx) {
    const int n = static_cast<int>(idx / input.c());
    const int ch = static_cast<int>(idx % input.c());
    const float inv_std = 1.0f / std::sqrt(p.var[ch] + p.eps);
    const float scale = inv_std * p.gamma[ch];
    const float mean = p.mean[ch];
    const float shift = p.beta[ch];
    const float* src = input.plane(n, ch);
    float* dst = out.plane(n, ch);
    for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - mean) * scale + shift;
  }
  return out;
}

Tensor relu(const Tensor& input, Exec exec) {
  return map_elementwise(input, exec, [](float v) { return v > 0.0f ? v : 0.0f; });
}

Tensor sigmoid(const Tensor& input, Exec exec) {
  return map_elementwise(input, exec, [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
}

Tensor softmax_channels(const Tensor& input, Exec exec) {
  Tensor out(input.shape());
  const int channels = input.c();
  const std::size_t hw = input.shape().plane();
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (int n = 0; n < input.n(); ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      float peak = -std::numeric_limits<float>::infinity();
      for (int ch = 0; ch < channels; ++ch) peak = std::max(peak, input.plane(n, ch)[i]);
      float total = 0.0f;
      for (int ch = 0; ch < channels; ++ch) {
        const float e = std::exp(input.plane(n, ch)[i] - peak);
        out.plane(n, ch)[i] = e;
        total += e;
      }
      for (int ch = 0; ch < channels; ++ch) out.plane(n, ch)[i] /= total;
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b, Exec exec) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* z = out.data().data();
  const long total = static_cast<long>(a.numel());
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long i = 0; i < total; ++i) z[i] = x[i] + y[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Exec exec) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool broadcast = sb.c == 1 && sa.c != 1;
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w && (sa.c == sb.c || broadcast),
          "mul: shape mismatch " + to_string(sa) + " vs " + to_string(sb));
  Tensor out(sa);
  const std::size_t hw = sa.plane();
  const long planes = static_cast<long>(sa.n) * sa.c;
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long idx = 0; idx < planes; ++idx) {
    const int n = static_cast<int>(idx / sa.c);
    const int ch = static_cast<int>(idx % sa.c);
    const float* x = a.plane(n, ch);
    const float* y = b.plane(n, broadcast ? 0 : ch);
    float* z = out.plane(n, ch);
    for (std::size_t i = 0; i < hw; ++i) z[i] = x[i] * y[i];
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
          "concat: shape mismatch " + to_string(sa) + " vs " + to_string(sb));
  Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t hw = sa.plane();
  for (int n = 0; n < sa.n; ++n) {
    if (sa.c > 0) std::memcpy(out.plane(n, 0), a.plane(n, 0), sa.c * hw * sizeof(float));
    if (sb.c > 0) std::memcpy(out.plane(n, sa.c), b.plane(n, 0), sb.c * hw * sizeof(float));
  }
  return out;
}

Shape maxpool_output_shape(const Shape& in, const PoolSpec& spec) {
  const int oh = conv_out_dim(in.h, spec.kernel.h, spec.stride.h, spec.padding.h);
  const int ow = conv_out_dim(in.w, spec.kernel.w, spec.stride.w, spec.padding.w);
  require(oh >= 1 && ow >= 1,
          fmt::format("maxpool output {}x{} < 1 for input {}x{}", oh, ow, in.h, in.w));
  return {in.n, in.c, oh, ow};
}

Tensor maxpool2d(const Tensor& input, const PoolSpec& spec, Exec exec) {
  const Shape os = maxpool_output_shape(input.shape(), spec);
  Tensor out(os);
  const long planes = static_cast<long>(os.n) * os.c;
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long idx = 0; idx < planes; ++idx) {
    const int n = static_cast<int>(idx / os.c);
    const int ch = static_cast<int>(idx % os.c);
    const float* src = input.plane(n, ch);
    float* dst = out.plane(n, ch);
    for (int oy = 0; oy < os.h; ++oy) {
      const int y0 = std::max(0, oy * spec.stride.h - spec.padding.h);
      const int y1 = std::min(input.h(), oy * spec.stride.h - spec.padding.h + spec.kernel.h);
      for (int ox = 0; ox < os.w; ++ox) {
        const int x0 = std::max(0, ox * spec.stride.w - spec.padding.w);
        const int x1 = std::min(input.w(), ox * spec.stride.w - spec.padding.w + spec.kernel.w);
        float best = -std::numeric_limits<float>::infinity();
        for (int y = y0; y < y1; ++y) {
          const float* row = src + static_cast<std::size_t>(y) * input.w();
          for (int x = x0; x < x1; ++x) best = std::max(best, row[x]);
        }
        dst[static_cast<std::size_t>(oy) * os.w + ox] = best;
      }
    }
  }
  return out;
}

namespace {

struct Taps {
  std::vector<int> lo, hi;
  std::vector<float> w_lo, w_hi;
};

Taps interpolation_taps(int in, int out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w_lo.resize(out);
  t.w_hi.resize(out);
  const float scale = static_cast<float>(in) / static_cast<float>(out);
  for (int d = 0; d < out; ++d) {
    float src = (static_cast<float>(d) + 0.5f) * scale - 0.5f;
    if (src < 0.0f) src = 0.0f;
    int i0 = static_cast<int>(src);
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = i0 < in - 1 ? i0 + 1 : i0;
    float frac = src - static_cast<float>(i0);
    if (frac > 1.0f) frac = 1.0f;
    t.lo[d] = i0;
    t.hi[d] = i1;
    t.w_hi[d] = frac;
    t.w_lo[d] = 1.0f - frac;
  }
  return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w, Exec exec) {
  require(out_h >= 1 && out_w >= 1,
          fmt::format("resize target {}x{} must be at least 1x1", out_h, out_w));
  require(input.h() >= 1 && input.w() >= 1, "resize input must be non-empty");
  const Shape os{input.n(), input.c(), out_h, out_w};
  Tensor out(os);
  const Taps ty = interpolation_taps(input.h(), out_h);
  const Taps tx = interpolation_taps(input.w(), out_w);
  const long planes = static_cast<long>(os.n) * os.c;
#pragma omp parallel for schedule(static) num_threads(clamp_threads(exec.threads))
  for (long idx = 0; idx < planes; ++idx) {
    const int n = static_cast<int>(idx / os.c);
    const int ch = static_cast<int>(idx % os.c);
    const float* src = input.plane(n, ch);
    float* dst = out.plane(n, ch);
    for (int oy = 0; oy < out_h; ++oy) {
      const float* r0 = src + static_cast<std::size_t>(ty.lo[oy]) * input.w();
      const float* r1 = src + static_cast<std::size_t>(ty.hi[oy]) * input.w();
      const float wy0 = ty.w_lo[oy];
      const float wy1 = ty.w_hi[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const int x0 = tx.lo[ox];
        const int x1 = tx.hi[ox];
        const float wx0 = tx.w_lo[ox];
        const float wx1 = tx.w_hi[ox];
        dst[static_cast<std::size_t>(oy) * out_w + ox] =
            wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
      }
    }
  }
  return out;
}

}  // namespace roadseg
