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

#include "fliqs/analysis.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace fliqs {
namespace {

SynthSpec spec_with(double rate, std::size_t size = 4096, std::size_t trials = 50) {
  SynthSpec s;
  s.outlier_rate = rate;
  s.tensor_size = size;
  s.trials = trials;
  s.seed = 3;
  return s;
}

TEST(SynthTensorTest, OutlierCountAndValue) {
  SynthSpec s = spec_with(1e-2, 10000);
  SynthSpec clean = s;
  clean.outlier_rate = 0.0;
  const auto x = synth_tensor(s, 0);
  const auto base = synth_tensor(clean, 0);
  double top = 0.0;
  for (double v : base) top = std::max(top, std::fabs(v));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != base[i]) {
      ++changed;
      EXPECT_EQ(x[i], 3.0 * top);
    }
  }
  EXPECT_EQ(changed, 100u);
}

TEST(SynthTensorTest, CleanTensorStaysInNaturalRange) {
  const auto x = synth_tensor(spec_with(0.0, 10000), 1);
  double top = 0.0, sq = 0.0;
  for (double v : x) {
    top = std::max(top, std::fabs(v));
    sq += v * v;
  }
  EXPECT_LT(top, 6.0);
  EXPECT_NEAR(sq / 10000.0, 1.0, 0.05);
}

TEST(SynthTensorTest, LaplacianHasUnitVariance) {
  SynthSpec s = spec_with(0.0, 200000);
  s.distribution = Distribution::Laplacian;
  const auto x = synth_tensor(s, 0);
  double sq = 0.0, ab = 0.0;
  for (double v : x) {
    sq += v * v;
    ab += std::fabs(v);
  }
  EXPECT_NEAR(sq / 200000.0, 1.0, 0.02);
  EXPECT_NEAR(ab / 200000.0, 1.0 / std::sqrt(2.0), 0.01);
}

TEST(SynthTensorTest, DeterministicAndValidated) {
  EXPECT_EQ(synth_tensor(spec_with(1e-3), 4), synth_tensor(spec_with(1e-3), 4));
  EXPECT_NE(synth_tensor(spec_with(1e-3), 4), synth_tensor(spec_with(1e-3), 5));
  EXPECT_THROW(synth_tensor(spec_with(0.5), 0), ParamError);
  EXPECT_THROW(parse_distribution("cauchy"), ConfigError);
}

TEST(PercentileTest, LinearInterpolation) {
  const std::vector<double> x = {-4.0, 1.0, 2.0, -3.0, 0.0};
  EXPECT_DOUBLE_EQ(abs_percentile(x, 100.0), 4.0);
  EXPECT_DOUBLE_EQ(abs_percentile(x, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(abs_percentile(x, 50.0), 2.0);
  EXPECT_DOUBLE_EQ(abs_percentile(x, 62.5), 2.5);
}

TEST(SwitchingSweepTest, EqualBitwidthsGiveZero) {
  const int k[] = {6};
  const auto pts = switching_sweep(k, 6, spec_with(0.0, 1024, 20));
  EXPECT_EQ(pts[0].mean, 0.0);
  EXPECT_EQ(pts[0].std_error, 0.0);
}

TEST(SwitchingSweepTest, SymmetricInFormats) {
  const int a[] = {6}, b[] = {8};
  const auto s = spec_with(1e-3, 1024, 20);
  EXPECT_EQ(switching_sweep(a, 8, s)[0].mean, switching_sweep(b, 6, s)[0].mean);
}

TEST(SwitchingSweepTest, DecreasesWithBitwidth) {
  const int k[] = {4, 5, 6, 7};
  const auto pts = switching_sweep(k, 8, spec_with(0.0, 2048, 40));
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LT(pts[i].mean, pts[i - 1].mean);
}

TEST(SwitchingSweepTest, HighPrecisionLimitIsQuantizationError) {
  const auto s = spec_with(0.0, 2048, 20);
  const int k[] = {20};
  const auto pts = switching_sweep(k, 8, s, ThresholdRule::MaxAbs);
  double pure = 0.0;
  for (std::size_t t = 0; t < s.trials; ++t) {
    const auto x = synth_tensor(s, t);
    pure += rms_quant_error(x, NumericFormat::integer(8), shared_threshold(x, ThresholdRule::MaxAbs));
  }
  pure /= static_cast<double>(s.trials);
  EXPECT_NEAR(pts[0].mean / pure, 1.0, 1e-4);
}

TEST(SwitchingSweepTest, DoublingTrialsStaysWithinTwoStandardErrors) {
  const int k[] = {4, 6};
  const auto small = switching_sweep(k, 8, spec_with(1e-3, 1024, 100));
  const auto large = switching_sweep(k, 8, spec_with(1e-3, 1024, 200));
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_LT(std::fabs(small[i].mean - large[i].mean), 2.0 * small[i].std_error);
  }
}

TEST(ExpFitTest, RecoversNoiselessParameters) {
  std::vector<double> xs, ys;
  for (int x = 1; x <= 8; ++x) {
    xs.push_back(x);
    ys.push_back(2.0 * std::exp(-0.5 * x) + 0.1);
  }
  const ExpFit f = fit_exponential(xs, ys);
  EXPECT_NEAR(f.A, 2.0, 1e-6);
  EXPECT_NEAR(f.B, 0.5, 1e-6);
  EXPECT_NEAR(f.C, 0.1, 1e-6);
  EXPECT_LT(f.residual, 1e-9);
  EXPECT_GT(f.r2, 0.999999);
}

TEST(ExpFitTest, ConstantData) {
  const std::vector<double> xs = {1, 2, 3, 4, 5}, ys(5, 0.7);
  const ExpFit f = fit_exponential(xs, ys);
  EXPECT_TRUE(std::fabs(f.A) < 1e-9 || f.B < 1e-9);
  EXPECT_NEAR(f.C + (f.B < 1e-9 ? f.A : 0.0), 0.7, 1e-9);
  EXPECT_LT(f.residual, 1e-9);
}

TEST(ExpFitTest, OrderInvariant) {
  std::vector<double> xs = {1, 2, 3, 4, 5, 6}, ys;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double x : xs) ys.push_back(1.5 * std::exp(-0.8 * x) + 0.2 + noise(rng));
  const ExpFit a = fit_exponential(xs, ys);
  std::vector<double> rx(xs.rbegin(), xs.rend()), ry(ys.rbegin(), ys.rend());
  std::swap(rx[1], rx[4]);
  std::swap(ry[1], ry[4]);
  const ExpFit b = fit_exponential(rx, ry);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(a.C, b.C);
}

TEST(ExpFitTest, RejectsTooFewPoints) {
  const std::vector<double> xs = {1, 2, 3}, ys = {3, 2, 1};
  EXPECT_THROW(fit_exponential(xs, ys), ParamError);
}

TEST(ExpFitTest, SwitchingSweepIsExponential) {
  const int k[] = {2, 3, 4, 5, 6, 7};
  const auto pts = switching_sweep(k, 8, spec_with(0.0, 2048, 50));
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(p.x);
    ys.push_back(p.mean);
  }
  EXPECT_GT(fit_exponential(xs, ys).r2, 0.9);
}

TEST(ClippingSweepTest, HighPrecisionPrefersNoClipping) {
  const auto grid = default_percentile_grid();
  const auto r = clipping_sweep(NumericFormat::integer(16), spec_with(0.0, 1024, 10), grid);
  EXPECT_EQ(r.optimal_percentile, 100.0);
}

TEST(ClippingSweepTest, LowBitwidthClipsHarder) {
  const auto grid = default_percentile_grid();
  const auto s = spec_with(1e-3, 4096, 20);
  const auto r4 = clipping_sweep(NumericFormat::integer(4), s, grid);
  const auto r8 = clipping_sweep(NumericFormat::integer(8), s, grid);
  EXPECT_LT(r4.optimal_percentile, r8.optimal_percentile);
}

TEST(ClippingSweepTest, TinyPercentileApproachesSecondMoment) {
  const std::vector<double> grid = {0.01};
  const auto s = spec_with(0.0, 4096, 10);
  const auto r = clipping_sweep(NumericFormat::integer(8), s, grid);
  EXPECT_NEAR(r.curve[0].mean, 1.0, 0.05);
  const std::vector<double> bad = {0.0};
  EXPECT_THROW(clipping_sweep(NumericFormat::integer(8), s, bad), ParamError);
}

TEST(SpearmanTest, RanksWithTies) {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {10, 20, 30, 40, 50}, c = {5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(a, b), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, c), -1.0);
  const std::vector<double> t = {1, 1, 2, 2, 3};
  EXPECT_GT(spearman(a, t), 0.9);
}

TEST(EntropyCorrelationTest, Conventions) {
  EntropySeries s;
  for (int i = 0; i < 120; ++i) {
    s.entropy.push_back(1.0 - i / 200.0);
    s.switching.push_back(0.0);
  }
  EXPECT_EQ(entropy_switch_correlation(s), 0.0);

  for (int i = 0; i < 120; ++i) s.switching[static_cast<std::size_t>(i)] = (120 - i) % 7 == 0 ? 0.0 : 1.0 - i / 150.0;
  EXPECT_GT(entropy_switch_correlation(s), 0.3);

  std::fill(s.entropy.begin(), s.entropy.end(), 0.5);
  EXPECT_THROW(entropy_switch_correlation(s), DomainError);

  EntropySeries short_trace;
  short_trace.entropy.assign(50, 1.0);
  short_trace.switching.assign(50, 1.0);
  EXPECT_THROW(entropy_switch_correlation(short_trace), InsufficientDataError);
}

}  // namespace
}  // namespace fliqs
