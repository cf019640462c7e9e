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

// Standalone numerics studies: switching-error sweeps with exponential fits,
// percentile clipping sweeps and entropy/switching trace statistics.

#ifndef FLIQS_ANALYSIS_HPP_
#define FLIQS_ANALYSIS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fliqs/error.hpp"
#include "fliqs/numerics.hpp"

namespace fliqs {

enum class Distribution { Gaussian, Laplacian };
Distribution parse_distribution(std::string_view name);
std::string distribution_name(Distribution d);

struct SynthSpec {
  Distribution distribution = Distribution::Gaussian;
  double outlier_rate = 0.0;  // one of 1e-1, 1e-2, 1e-3, 1e-4, 0
  double outlier_scale = 3.0;
  std::size_t tensor_size = 4096;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Unit-variance draws (Laplacian scale 1/sqrt(2)). round(rate * size)
// distinct positions are overwritten with outlier_scale * max|x|.
std::vector<double> synth_tensor(const SynthSpec& spec, std::uint64_t trial);

// Linear-interpolated p-th percentile (p in [0, 100]) of |x|.
double abs_percentile(std::span<const double> x, double p);

enum class ThresholdRule { Percentile999, MaxAbs };
ThresholdRule parse_threshold_rule(std::string_view name);
std::string threshold_rule_name(ThresholdRule r);
double shared_threshold(std::span<const double> x, ThresholdRule rule);

// RMS of Q(x; f2) - Q(x; f1) under one shared threshold.
double rms_switching_error(std::span<const double> x, const NumericFormat& f1, const NumericFormat& f2,
                           double threshold);
// RMS of Q(x; f) - x.
double rms_quant_error(std::span<const double> x, const NumericFormat& f, double threshold);

struct SweepPoint {
  double x = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean RMS switching error between Int(k1) and Int(k2) for each k1, averaged
// over spec.trials tensors.
std::vector<SweepPoint> switching_sweep(std::span<const int> k1_range, int k2, const SynthSpec& spec,
                                        ThresholdRule rule = ThresholdRule::Percentile999);

struct ExpFit {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double residual = 0.0;  // RMS
  double r2 = 0.0;
  int iterations = 0;

  double operator()(double x) const;
};

class FitFailure : public Error {
 public:
  FitFailure(const std::string& what, ExpFit best) : Error(what), best_(best) {}
  const ExpFit& best() const noexcept { return best_; }

 private:
  ExpFit best_;
};

// Least squares A*exp(-B*x) + C with B >= 0: grid over B, then
// Levenberg-Marquardt. Invariant to the order of the pairs.
ExpFit fit_exponential(std::span<const double> xs, std::span<const double> ys);

struct ClippingResult {
  std::vector<SweepPoint> curve;  // x = percentile, mean = MSE
  double optimal_percentile = 0.0;
  double optimal_mse = 0.0;
};

std::vector<double> default_percentile_grid();  // 1, 2, ..., 100
ClippingResult clipping_sweep(const NumericFormat& f, const SynthSpec& spec, std::span<const double> grid);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

struct EntropySeries {
  std::vector<double> entropy;
  std::vector<double> switching;
};

// Post-warmup (policy_updated) rows of a search trace CSV.
EntropySeries read_entropy_series(const std::filesystem::path& trace_csv);

// Spearman(entropy, switching). Needs >= 100 rows; zero switching gives 0,
// constant entropy raises DomainError.
double entropy_switch_correlation(const EntropySeries& series);

}  // namespace fliqs

#endif  // FLIQS_ANALYSIS_HPP_
