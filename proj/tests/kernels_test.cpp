/* Copyright 2026 The fliqs Authors. All Rights Reserved.

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

#include "fliqs/kernels.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

namespace fliqs::kernels {
namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Textbook triple loop in double.
std::vector<double> naive_gemm(Trans ta, Trans tb, GemmShape s, const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::vector<double> c(s.m * s.n, 0.0);
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = ta == Trans::No ? a[i * s.k + p] : a[p * s.m + i];
        const double bv = tb == Trans::No ? b[p * s.n + j] : b[j * s.k + p];
        acc += av * bv;
      }
      c[i * s.n + j] = acc;
    }
  return c;
}

TEST(Gemm, SerialMatchesNaiveAndParallelIsBitIdentical) {
  const GemmShape shapes[] = {{1, 1, 1}, {3, 5, 7}, {17, 300, 33}, {64, 10, 129}, {5, 513, 2}};
  for (const auto& s : shapes) {
    for (Trans ta : {Trans::No, Trans::Yes})
      for (Trans tb : {Trans::No, Trans::Yes}) {
        const auto a = random_vec(s.m * s.k, 1), b = random_vec(s.k * s.n, 2);
        const auto ref = naive_gemm(ta, tb, s, a, b);
        std::vector<double> cs(s.m * s.n), cp(s.m * s.n);
        serial::gemm(ta, tb, s, a, b, cs, false);
        parallel::gemm(ta, tb, s, a, b, cp, false);
        for (std::size_t i = 0; i < cs.size(); ++i) {
          EXPECT_NEAR(cs[i], ref[i], 1e-10 * (1.0 + std::fabs(ref[i])));
          ASSERT_EQ(cs[i], cp[i]) << s.m << "x" << s.n << "x" << s.k;
        }
        auto cs2 = cs, cp2 = cp;
        serial::gemm(ta, tb, s, a, b, cs2, true);
        parallel::gemm(ta, tb, s, a, b, cp2, true);
        EXPECT_EQ(cs2, cp2);
        EXPECT_NEAR(cs2[0], 2 * cs[0], 1e-12 * (1.0 + std::fabs(cs[0])));
      }
  }
}

TEST(Conv, Im2colMatchesDirectConvolution) {
  const ConvGeometry g{3, 6, 5, 3, 2, 1};
  const std::size_t batch = 2, out = 4;
  const auto x = random_vec(batch * 3 * 6 * 5, 3), w = random_vec(out * g.patch(), 4);
  const std::size_t oh = g.out_height(), ow = g.out_width(), cols = batch * oh * ow;
  std::vector<double> col(g.patch() * cols), y(out * cols);
  serial::im2col(g, batch, x, col);
  serial::gemm(Trans::No, Trans::No, {out, cols, g.patch()}, w, col, y, false);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t u = 0; u < 3; ++u)
              for (std::size_t v = 0; v < 3; ++v) {
                const auto r = static_cast<long>(i * 2 + u) - 1, q = static_cast<long>(j * 2 + v) - 1;
                if (r < 0 || q < 0 || r >= 6 || q >= 5) continue;
                acc += w[o * g.patch() + (c * 3 + u) * 3 + v] * x[((n * 3 + c) * 6 + r) * 5 + q];
              }
          EXPECT_NEAR(y[o * cols + (n * oh + i) * ow + j], acc, 1e-12);
        }
}

TEST(Conv, Col2imIsAdjointOfIm2col) {
  const ConvGeometry g{2, 7, 7, 3, 1, 1};
  const std::size_t batch = 3, cols = batch * g.out_height() * g.out_width();
  const auto x = random_vec(batch * 2 * 49, 5), y = random_vec(g.patch() * cols, 6);
  std::vector<double> col(g.patch() * cols), back(x.size(), 0.0), back_p(x.size(), 0.0), col_p(col.size());
  serial::im2col(g, batch, x, col);
  serial::col2im(g, batch, y, back);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) lhs += col[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::fabs(lhs));
  parallel::im2col(g, batch, x, col_p);
  parallel::col2im(g, batch, y, back_p);
  EXPECT_EQ(col, col_p);
  EXPECT_EQ(back, back_p);
}

TEST(Depthwise, SerialAndParallelAgree) {
  const ConvGeometry g{4, 9, 9, 5, 2, 2};
  const std::size_t batch = 2, outn = batch * 4 * g.out_height() * g.out_width();
  const auto x = random_vec(batch * 4 * 81, 7), w = random_vec(4 * 25, 8), gy = random_vec(outn, 9);
  std::vector<double> ys(outn), yp(outn);
  serial::depthwise_forward(g, batch, x, w, ys);
  parallel::depthwise_forward(g, batch, x, w, yp);
  EXPECT_EQ(ys, yp);
  std::vector<double> gxs(x.size()), gxp(x.size()), gws(w.size()), gwp(w.size());
  serial::depthwise_backward(g, batch, x, w, gy, gxs, gws);
  parallel::depthwise_backward(g, batch, x, w, gy, gxp, gwp);
  EXPECT_EQ(gxs, gxp);
  EXPECT_EQ(gws, gwp);
  // <dy, conv(x)> is linear in x and in w.
  double dot = 0.0;
  for (std::size_t i = 0; i < outn; ++i) dot += gy[i] * ys[i];
  double viax = 0.0, viaw = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) viax += gxs[i] * x[i];
  for (std::size_t i = 0; i < w.size(); ++i) viaw += gws[i] * w[i];
  EXPECT_NEAR(viax, dot, 1e-9 * std::fabs(dot));
  EXPECT_NEAR(viaw, dot, 1e-9 * std::fabs(dot));
}

TEST(FakeQuantize, MatchesScalarQuantizerAndMask) {
  const auto x = random_vec(5000, 10);
  for (const char* name : {"INT4", "E4M3", "E2M1", "BF16"}) {
    const auto f = parse_format(name);
    std::vector<double> ys(x.size()), yp(x.size());
    std::vector<std::uint8_t> ms(x.size()), mp(x.size());
    serial::fake_quantize(x, ys, f, 1.5, ms);
    parallel::fake_quantize(x, yp, f, 1.5, mp);
    EXPECT_EQ(ys, yp) << name;
    EXPECT_EQ(ms, mp) << name;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_EQ(ys[i], quantize(x[i], f, QuantConfig{1.5})) << name;
      if (!f.is_bf16()) {
        ASSERT_EQ(ms[i], std::fabs(x[i]) <= 1.5 ? 1 : 0) << name;
      }
    }
    std::vector<double> inplace = x;
    parallel::fake_quantize(inplace, inplace, f, 1.5, {});
    EXPECT_EQ(inplace, ys) << name;
  }
}

}  // namespace
}  // namespace fliqs::kernels
