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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "roadseg/error.hpp"
#include "roadseg/kernels.hpp"
#include "roadseg/reference.hpp"
#include "test_util.hpp"

namespace roadseg {
namespace {

using testing::iota;
using testing::random_tensor;

ConvSpec square(int k, int stride, int pad, bool bias = false) {
  ConvSpec s;
  s.kernel = {k, k};
  s.stride = {stride, stride};
  s.padding = {pad, pad};
  s.bias = bias;
  return s;
}

TEST(Tensor, ConstructionChecksDataLength) {
  EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(Tensor({1, -1, 2, 2}), ShapeError);
  Tensor t({1, 2, 3, 4}, 1.5f);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.at(0, 1, 2, 3), 1.5f);
  EXPECT_TRUE(t.all_finite());
  t.at(0, 0, 0, 0) = NAN;
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, MaxAbsDiffRejectsShapeMismatch) {
  EXPECT_THROW(max_abs_diff(Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 3})), ShapeError);
  EXPECT_FLOAT_EQ(max_abs_diff(Tensor({1, 1, 1, 2}, {1, 2}), Tensor({1, 1, 1, 2}, {1, 5})), 3.0f);
}

TEST(Conv2d, AllOnesCenterIsNine) {
  const Tensor out = conv2d(Tensor::ones({1, 1, 3, 3}), Tensor::ones({1, 1, 3, 3}), std::nullopt,
                            square(3, 1, 1));
  ASSERT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_FLOAT_EQ(out.at(0, 0, 1, 1), 9.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 0), 4.0f);
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, {2, 1, 5, 7});
  const Tensor out = conv2d(x, Tensor::ones({1, 1, 1, 1}), std::nullopt, square(1, 1, 0));
  EXPECT_TRUE(bit_identical(out, x));
}

TEST(Conv2d, DilatedDepthwiseRow) {
  ConvSpec s;
  s.kernel = {1, 5};
  s.dilation = {1, 2};
  s.padding = {0, 4};
  const Tensor out = conv2d(iota({1, 1, 1, 7}), Tensor::ones({1, 1, 1, 5}), std::nullopt, s);
  ASSERT_EQ(out.w(), 7);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 0), 9.0f);  // taps at x = 0, 2, 4
  EXPECT_FLOAT_EQ(out.at(0, 0, 0, 3), 2 + 4 + 6.0f);  // x = 1, 3, 5; x = 7 is padding
}

TEST(Conv2d, BiasIsAdded) {
  const std::vector<float> bias{0.25f, -1.0f};
  const Tensor out = conv2d(Tensor::ones({1, 1, 2, 2}), Tensor::ones({2, 1, 1, 1}),
                            std::span<const float>(bias), square(1, 1, 0, true));
  EXPECT_FLOAT_EQ(out.at(0, 0, 1, 1), 1.25f);
  EXPECT_FLOAT_EQ(out.at(0, 1, 0, 0), 0.0f);
}

TEST(Conv2d, ShapeErrorsNameTheDimension) {
  try {
    conv2d(Tensor({1, 3, 4, 4}), Tensor({2, 2, 3, 3}), std::nullopt, square(3, 1, 1));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 5, 5}), std::nullopt, square(5, 1, 0)),
               ShapeError);
  ConvSpec grouped = square(1, 1, 0);
  grouped.groups = 2;
  EXPECT_THROW(conv2d(Tensor({1, 3, 2, 2}), Tensor({2, 1, 1, 1}), std::nullopt, grouped),
               ShapeError);
}

TEST(Conv2d, ShapeLawMatchesCountingOracle) {
  std::mt19937_64 rng(2);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const int in = pick(1, 20), k = pick(1, 7), s = pick(1, 3), p = pick(0, 3), d = pick(1, 3);
    // Count output positions whose window start lies inside the padded extent.
    int count = 0;
    for (int start = -p; start + d * (k - 1) <= in - 1 + p; start += s) ++count;
    EXPECT_EQ(conv_out_dim(in, k, s, p, d), count) << in << " " << k << " " << s << " " << p;
    if (count >= 1) {
      ConvSpec spec;
      spec.kernel = {k, 1};
      spec.stride = {s, 1};
      spec.padding = {p, 0};
      spec.dilation = {d, 1};
      EXPECT_EQ(conv2d(Tensor({1, 1, in, 2}), Tensor({1, 1, k, 1}), std::nullopt, spec).h(), count);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Conv2d, Linearity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s{1, 4, 9, 11};
    const Tensor x = random_tensor(rng, s), y = random_tensor(rng, s);
    const Tensor k = random_tensor(rng, {3, 4, 3, 3});
    const float alpha = 1.7f, beta = -0.6f;
    Tensor mix(s);
    for (std::size_t i = 0; i < mix.numel(); ++i) {
      mix.data()[i] = alpha * x.data()[i] + beta * y.data()[i];
    }
    const ConvSpec spec = square(3, 2, 1);
    const Tensor lhs = conv2d(mix, k, std::nullopt, spec);
    const Tensor cx = conv2d(x, k, std::nullopt, spec), cy = conv2d(y, k, std::nullopt, spec);
    for (std::size_t i = 0; i < lhs.numel(); ++i) {
      const float rhs = alpha * cx.data()[i] + beta * cy.data()[i];
      EXPECT_NEAR(lhs.data()[i], rhs, 1e-5 * std::max(1.0f, std::fabs(rhs)));
    }
  }
}

TEST(Conv2d, MatchesNaiveReference) {
  std::mt19937_64 rng(4);
  const struct {
    Shape in;
    int cout;
    ConvSpec spec;
  } cases[] = {
      {{2, 8, 16, 16}, 8, square(3, 1, 1, true)},
      {{1, 3, 16, 15}, 8, square(7, 2, 3)},
      {{2, 8, 13, 16}, 8, square(1, 2, 0)},
      {{1, 8, 16, 16}, 4, square(5, 1, 2, true)},
  };
  for (const auto& c : cases) {
    const Tensor x = random_tensor(rng, c.in);
    const Tensor k = random_tensor(rng, {c.cout, c.in.c, c.spec.kernel.h, c.spec.kernel.w});
    const Tensor b = random_tensor(rng, {1, 1, 1, c.cout});
    std::optional<std::span<const float>> bias;
    if (c.spec.bias) bias = b.data();
    const Tensor got = conv2d(x, k, bias, c.spec);
    const Tensor want =
        reference::conv2d(x, k, c.spec.bias ? b.data() : std::span<const float>{}, c.spec);
    EXPECT_LE(max_abs_diff(got, want), 1e-5f) << to_string(c.in);
  }
}

TEST(Conv2d, DepthwiseMatchesNaiveReference) {
  std::mt19937_64 rng(5);
  for (int dil = 1; dil <= 2; ++dil) {
    ConvSpec row;
    row.kernel = {1, 5};
    row.dilation = {1, dil};
    row.padding = {0, 2 * dil};
    row.groups = 8;
    row.bias = true;
    const Tensor x = random_tensor(rng, {2, 8, 9, 16});
    const Tensor k = random_tensor(rng, {8, 1, 1, 5});
    const Tensor b = random_tensor(rng, {1, 1, 1, 8});
    EXPECT_LE(max_abs_diff(conv2d(x, k, b.data(), row), reference::conv2d(x, k, b.data(), row)),
              1e-5f);
  }
}

TEST(Kernels, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor(rng, {1, 16, 23, 37});
  const Tensor k = random_tensor(rng, {24, 16, 3, 3});
  const Tensor pw = random_tensor(rng, {8, 16, 1, 1});
  ConvSpec dw = square(3, 1, 1);
  dw.groups = 16;
  const Tensor kdw = random_tensor(rng, {16, 1, 3, 3});
  const Tensor c1 = conv2d(x, k, std::nullopt, square(3, 2, 1), Exec{1});
  const Tensor p1 = conv2d(x, pw, std::nullopt, square(1, 1, 0), Exec{1});
  const Tensor d1 = conv2d(x, kdw, std::nullopt, dw, Exec{1});
  const Tensor m1 = maxpool2d(x, {}, Exec{1});
  const Tensor r1 = bilinear_resize(x, 50, 13, Exec{1});
  const Tensor s1 = softmax_channels(x, Exec{1});
  for (int t : {2, 4, 8}) {
    EXPECT_TRUE(bit_identical(conv2d(x, k, std::nullopt, square(3, 2, 1), Exec{t}), c1)) << t;
    EXPECT_TRUE(bit_identical(conv2d(x, pw, std::nullopt, square(1, 1, 0), Exec{t}), p1)) << t;
    EXPECT_TRUE(bit_identical(conv2d(x, kdw, std::nullopt, dw, Exec{t}), d1)) << t;
    EXPECT_TRUE(bit_identical(maxpool2d(x, {}, Exec{t}), m1)) << t;
    EXPECT_TRUE(bit_identical(bilinear_resize(x, 50, 13, Exec{t}), r1)) << t;
    EXPECT_TRUE(bit_identical(softmax_channels(x, Exec{t}), s1)) << t;
  }
}

TEST(BatchNorm, Examples) {
  const std::vector<float> one{1}, zero{0}, five{5}, two{2}, three{3};
  BatchNormParams identity{one, zero, zero, one, 0.0f};
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(rng, {2, 1, 3, 3});
  EXPECT_TRUE(bit_identical(batchnorm_infer(x, identity), x));

  BatchNormParams centre{three, five, two, one};
  EXPECT_FLOAT_EQ(batchnorm_infer(Tensor({1, 1, 1, 1}, 2.0f), centre).at(0, 0, 0, 0), 5.0f);

  const std::vector<float> mean{1}, var{3};
  BatchNormParams scaled{two, zero, mean, var, 1.0f};
  EXPECT_FLOAT_EQ(batchnorm_infer(Tensor({1, 1, 1, 1}, 3.0f), scaled).at(0, 0, 0, 0), 2.0f);

  BatchNormParams wrong{one, zero, zero, one};
  EXPECT_THROW(batchnorm_infer(Tensor({1, 2, 1, 1}), wrong), ShapeError);
}

TEST(Activations, Examples) {
  EXPECT_EQ(relu(Tensor({1, 1, 1, 1}, -1.5f)).at(0, 0, 0, 0), 0.0f);
  EXPECT_EQ(relu(Tensor({1, 1, 1, 1}, 2.5f)).at(0, 0, 0, 0), 2.5f);
  EXPECT_FLOAT_EQ(sigmoid(Tensor({1, 1, 1, 1}, 0.0f)).at(0, 0, 0, 0), 0.5f);
  const Tensor extreme = sigmoid(Tensor({1, 1, 1, 2}, {-200.0f, 200.0f}));
  EXPECT_TRUE(extreme.all_finite());
  EXPECT_FLOAT_EQ(extreme.at(0, 0, 0, 1), 1.0f);
  const Tensor sm = softmax_channels(Tensor({1, 2, 1, 1}, 0.0f));
  EXPECT_FLOAT_EQ(sm.at(0, 0, 0, 0), 0.5f);
  EXPECT_FLOAT_EQ(sm.at(0, 1, 0, 0), 0.5f);
}

TEST(Activations, SoftmaxSumsToOne) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor(rng, {2, 5, 17, 19}, -30.0f, 30.0f);
  const Tensor sm = softmax_channels(x);
  ASSERT_TRUE(sm.all_finite());
  for (int n = 0; n < 2; ++n) {
    for (int y = 0; y < 17; ++y) {
      for (int xx = 0; xx < 19; ++xx) {
        double sum = 0;
        for (int c = 0; c < 5; ++c) sum += sm.at(n, c, y, xx);
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
    }
  }
}

TEST(Elementwise, Examples) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor(rng, {1, 3, 4, 5});
  EXPECT_TRUE(bit_identical(mul(x, Tensor::ones({1, 1, 4, 5})), x));
  EXPECT_TRUE(bit_identical(add(x, Tensor::zeros(x.shape())), x));
  const Tensor cat = concat_channels(Tensor({1, 3, 2, 2}, 1.0f), Tensor({1, 5, 2, 2}, 2.0f));
  EXPECT_EQ(cat.shape(), (Shape{1, 8, 2, 2}));
  EXPECT_EQ(cat.at(0, 2, 1, 1), 1.0f);
  EXPECT_EQ(cat.at(0, 3, 0, 0), 2.0f);
  const Tensor gate = mul(Tensor({1, 2, 1, 2}, 3.0f), Tensor({1, 1, 1, 2}, {0.5f, 2.0f}));
  EXPECT_EQ(gate.at(0, 1, 0, 0), 1.5f);
  EXPECT_EQ(gate.at(0, 0, 0, 1), 6.0f);
}

TEST(Elementwise, IncompatibleShapesThrow) {
  EXPECT_THROW(add(Tensor({1, 2, 2, 2}), Tensor({1, 2, 2, 3})), ShapeError);
  EXPECT_THROW(mul(Tensor({1, 2, 2, 2}), Tensor({1, 3, 2, 2})), ShapeError);
  EXPECT_THROW(concat_channels(Tensor({1, 2, 2, 2}), Tensor({1, 2, 3, 2})), ShapeError);
}

TEST(MaxPool, Examples) {
  const Tensor constant = maxpool2d(Tensor({1, 2, 7, 6}, -3.0f));
  for (float v : constant.data()) EXPECT_EQ(v, -3.0f);

  const Tensor out = maxpool2d(iota({1, 1, 4, 4}));
  ASSERT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(out.at(0, 0, 0, 0), 6.0f);
  EXPECT_EQ(out.at(0, 0, 0, 1), 8.0f);
  EXPECT_EQ(out.at(0, 0, 1, 0), 14.0f);
  EXPECT_EQ(out.at(0, 0, 1, 1), 16.0f);

  EXPECT_EQ(maxpool_output_shape({1, 1, 5, 5}, {}).h, 3);
}

TEST(MaxPool, PaddingNeverWins) {
  // All-negative input: zero padding would leak 0 into border windows.
  const Tensor out = maxpool2d(iota({1, 1, 4, 4}, -20.0f));
  EXPECT_EQ(out.at(0, 0, 0, 0), -15.0f);
}

TEST(MaxPool, MatchesNaiveReference) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor(rng, {2, 8, 15, 16});
  EXPECT_EQ(max_abs_diff(maxpool2d(x), reference::maxpool2d(x, {})), 0.0f);
}

TEST(Resize, Examples) {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor(rng, {1, 2, 5, 7});
  EXPECT_TRUE(bit_identical(bilinear_resize(x, 5, 7), x));

  const Tensor c = bilinear_resize(Tensor({1, 1, 3, 4}, 0.75f), 11, 2);
  for (float v : c.data()) EXPECT_FLOAT_EQ(v, 0.75f);

  const Tensor up = bilinear_resize(Tensor({1, 1, 1, 2}, {0.0f, 2.0f}), 1, 4);
  const float want[] = {0.0f, 0.5f, 1.5f, 2.0f};
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(up.at(0, 0, 0, i), want[i]) << i;
}

TEST(Resize, MatchesNaiveReference) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor(rng, {2, 8, 16, 13});
  for (auto [oh, ow] : {std::pair{8, 4}, {31, 40}, {1, 1}, {16, 3}, {5, 13}}) {
    EXPECT_LE(max_abs_diff(bilinear_resize(x, oh, ow), reference::bilinear_resize(x, oh, ow)),
              1e-5f);
  }
}

}  // namespace
}  // namespace roadseg
