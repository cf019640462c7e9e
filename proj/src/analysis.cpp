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

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "fliqs/rng.hpp"

namespace fliqs {

Distribution parse_distribution(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "gaussian" || s == "normal") return Distribution::Gaussian;
  if (s == "laplacian" || s == "laplace") return Distribution::Laplacian;
  throw ParseError(std::string(name), "expected 'gaussian' or 'laplacian'");
}

std::string distribution_name(Distribution d) {
  return d == Distribution::Gaussian ? "gaussian" : "laplacian";
}

void SynthSpec::validate() const {
  constexpr std::array<double, 5> kRates = {1e-1, 1e-2, 1e-3, 1e-4, 0.0};
  if (std::none_of(kRates.begin(), kRates.end(), [&](double r) { return r == outlier_rate; })) {
    throw ParamError("outlier_rate must be one of 0.1, 0.01, 0.001, 0.0001, 0");
  }
  if (!(outlier_scale > 0.0)) throw ParamError("outlier_scale must be positive");
  if (tensor_size == 0) throw ParamError("tensor_size must be positive");
  if (trials == 0) throw ParamError("trials must be at least 1");
}

std::vector<double> synth_tensor(const SynthSpec& spec, std::uint64_t trial) {
  spec.validate();
  Rng rng = make_rng(spec.seed, streams::kAnalysis, trial);
  std::vector<double> x(spec.tensor_size);
  if (spec.distribution == Distribution::Gaussian) {
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& v : x) v = d(rng);
  } else {
    // Inverse CDF of Laplace(0, b) with b = 1/sqrt(2).
    const double b = 1.0 / std::sqrt(2.0);
    for (auto& v : x) {
      const double u = uniform01(rng) - 0.5;
      v = -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::fabs(u));
    }
  }
  const auto count = static_cast<std::size_t>(std::llround(spec.outlier_rate * static_cast<double>(x.size())));
  if (count > 0) {
    double top = 0.0;
    for (double v : x) top = std::max(top, std::fabs(v));
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      x[idx[i]] = spec.outlier_scale * top;
    }
  }
  return x;
}

namespace {

std::vector<double> sorted_abs(std::span<const double> x) {
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::fabs(x[i]);
  std::sort(a.begin(), a.end());
  return a;
}

double sorted_percentile(const std::vector<double>& a, double p) {
  const double pos = p / 100.0 * static_cast<double>(a.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, a.size() - 1);
  return a[lo] + (pos - static_cast<double>(lo)) * (a[hi] - a[lo]);
}

}  // namespace

double abs_percentile(std::span<const double> x, double p) {
  if (x.empty()) throw ParamError("abs_percentile: empty tensor");
  if (!(p >= 0.0 && p <= 100.0)) throw ParamError("abs_percentile: p must lie in [0, 100]");
  return sorted_percentile(sorted_abs(x), p);
}

ThresholdRule parse_threshold_rule(std::string_view name) {
  if (name == "p99.9" || name == "percentile") return ThresholdRule::Percentile999;
  if (name == "max" || name == "maxabs") return ThresholdRule::MaxAbs;
  throw ParseError(std::string(name), "expected 'p99.9' or 'max'");
}

std::string threshold_rule_name(ThresholdRule r) { return r == ThresholdRule::MaxAbs ? "max" : "p99.9"; }

double shared_threshold(std::span<const double> x, ThresholdRule rule) {
  return abs_percentile(x, rule == ThresholdRule::MaxAbs ? 100.0 : 99.9);
}

double rms_switching_error(std::span<const double> x, const NumericFormat& f1, const NumericFormat& f2,
                           double threshold) {
  const QuantConfig q{threshold, Rounding::HalfToEven};
  double sq = 0.0;
  for (double v : x) {
    const double d = quantize(v, f2, q) - quantize(v, f1, q);
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(x.size()));
}

double rms_quant_error(std::span<const double> x, const NumericFormat& f, double threshold) {
  const QuantConfig q{threshold, Rounding::HalfToEven};
  double sq = 0.0;
  for (double v : x) {
    const double d = quantize(v, f, q) - v;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(x.size()));
}

namespace {

SweepPoint summarize(double x, std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  const double sd = samples.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return {x, mean, sd / std::sqrt(n)};
}

}  // namespace

std::vector<SweepPoint> switching_sweep(std::span<const int> k1_range, int k2, const SynthSpec& spec,
                                        ThresholdRule rule) {
  if (k1_range.empty()) throw ParamError("switching_sweep: k1 range is empty");
  spec.validate();
  const NumericFormat f2 = NumericFormat::integer(k2);
  std::vector<NumericFormat> f1;
  for (int k : k1_range) f1.push_back(NumericFormat::integer(k));

  // errors[trial][k1]
  std::vector<double> errors(spec.trials * f1.size());
  const auto trials = static_cast<std::int64_t>(spec.trials);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto x = synth_tensor(spec, static_cast<std::uint64_t>(t));
    const double sigma = shared_threshold(x, rule);
    for (std::size_t j = 0; j < f1.size(); ++j) {
      errors[static_cast<std::size_t>(t) * f1.size() + j] = rms_switching_error(x, f1[j], f2, sigma);
    }
  }
  std::vector<SweepPoint> out;
  std::vector<double> column(spec.trials);
  for (std::size_t j = 0; j < f1.size(); ++j) {
    for (std::size_t t = 0; t < spec.trials; ++t) column[t] = errors[t * f1.size() + j];
    out.push_back(summarize(k1_range[j], column));
  }
  return out;
}

// ---------------------------------------------------------------------------
// exponential fit

double ExpFit::operator()(double x) const { return A * std::exp(-B * x) + C; }

namespace {

struct Pairs {
  std::vector<double> x, y;
};

double sse_of(const Pairs& p, double a, double b, double c) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    const double r = a * std::exp(-b * p.x[i]) + c - p.y[i];
    s += r * r;
  }
  return s;
}

// Linear least squares for A and C at fixed B. Returns false if singular.
bool solve_linear(const Pairs& p, double b, double& a, double& c) {
  double s_ee = 0, s_e = 0, s_ey = 0, s_y = 0;
  const auto n = static_cast<double>(p.x.size());
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    const double e = std::exp(-b * p.x[i]);
    s_ee += e * e;
    s_e += e;
    s_ey += e * p.y[i];
    s_y += p.y[i];
  }
  const double det = s_ee * n - s_e * s_e;
  if (std::fabs(det) <= 1e-14 * std::max(1.0, s_ee * n)) return false;
  a = (s_ey * n - s_e * s_y) / det;
  c = (s_ee * s_y - s_e * s_ey) / det;
  return true;
}

bool solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> v, std::array<double, 3>& out) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    }
    if (std::fabs(m[piv][col]) < 1e-300) return false;
    std::swap(m[col], m[piv]);
    std::swap(v[col], v[piv]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
      v[r] -= f * v[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = v[r];
    for (int k = r + 1; k < 3; ++k) s -= m[r][k] * out[k];
    out[r] = s / m[r][r];
  }
  return true;
}

}  // namespace

ExpFit fit_exponential(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ParamError("fit_exponential: xs and ys differ in length");
  if (xs.size() < 4) throw ParamError("fit_exponential: need at least 4 points");
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] != xs[b] ? xs[a] < xs[b] : ys[a] < ys[b]; });
  Pairs p;
  for (auto i : order) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DomainError("fit_exponential: non-finite input");
    p.x.push_back(xs[i]);
    p.y.push_back(ys[i]);
  }
  const auto n = static_cast<double>(p.x.size());
  const double ymean = std::accumulate(p.y.begin(), p.y.end(), 0.0) / n;
  double sst = 0.0;
  for (double y : p.y) sst += (y - ymean) * (y - ymean);

  ExpFit best;
  best.C = ymean;
  double best_sse = sse_of(p, 0.0, 0.0, ymean);
  for (int g = 0; g <= 290; ++g) {
    const double b = 0.1 + 0.01 * g;
    double a = 0, c = 0;
    if (!solve_linear(p, b, a, c)) continue;
    const double s = sse_of(p, a, b, c);
    if (s < best_sse) {
      best_sse = s;
      best.A = a;
      best.B = b;
      best.C = c;
    }
  }

  auto finish = [&](ExpFit f, double sse) {
    f.residual = std::sqrt(sse / n);
    f.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse <= 1e-24 ? 1.0 : 0.0);
    return f;
  };

  const double tiny = 1e-28 * (1.0 + sst + ymean * ymean * n);
  double lambda = 1e-3;
  constexpr int kMaxIterations = 200;
  for (int it = 1; it <= kMaxIterations; ++it) {
    best.iterations = it;
    if (best_sse <= tiny) return finish(best, best_sse);
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      const double e = std::exp(-best.B * p.x[i]);
      const std::array<double, 3> jrow = {e, -best.A * p.x[i] * e, 1.0};
      const double r = best.A * e + best.C - p.y[i];
      for (int a = 0; a < 3; ++a) {
        jtr[a] += jrow[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a][b] += jrow[a] * jrow[b];
      }
    }
    bool improved = false;
    while (lambda < 1e16) {
      auto m = jtj;
      for (int a = 0; a < 3; ++a) m[a][a] += lambda * std::max(jtj[a][a], 1e-30);
      std::array<double, 3> step{};
      std::array<double, 3> rhs = {-jtr[0], -jtr[1], -jtr[2]};
      if (solve3(m, rhs, step)) {
        ExpFit trial = best;
        trial.A += step[0];
        trial.B = std::max(0.0, trial.B + step[1]);
        trial.C += step[2];
        const double s = sse_of(p, trial.A, trial.B, trial.C);
        if (s < best_sse) {
          const double gain = best_sse - s;
          best = trial;
          best_sse = s;
          lambda = std::max(lambda / 10.0, 1e-12);
          improved = true;
          const double scale = std::fabs(best.A) + std::fabs(best.B) + std::fabs(best.C) + 1.0;
          const double step_norm = std::fabs(step[0]) + std::fabs(step[1]) + std::fabs(step[2]);
          if (gain <= 1e-15 * best_sse || step_norm <= 1e-13 * scale) return finish(best, best_sse);
          break;
        }
      }
      lambda *= 10.0;
    }
    // No damping level improves the fit: a stationary point.
    if (!improved) return finish(best, best_sse);
  }
  throw FitFailure("fit_exponential: no convergence after " + std::to_string(kMaxIterations) + " iterations",
                   finish(best, best_sse));
}

// ---------------------------------------------------------------------------
// clipping

std::vector<double> default_percentile_grid() {
  std::vector<double> g(100);
  for (int i = 0; i < 100; ++i) g[static_cast<std::size_t>(i)] = i + 1.0;
  return g;
}

ClippingResult clipping_sweep(const NumericFormat& f, const SynthSpec& spec, std::span<const double> grid) {
  if (grid.empty()) throw ParamError("clipping_sweep: empty percentile grid");
  for (double p : grid) {
    if (!(p > 0.0 && p <= 100.0)) throw ParamError("clipping_sweep: percentiles must lie in (0, 100]");
  }
  spec.validate();
  std::vector<double> mse(spec.trials * grid.size());
  const auto trials = static_cast<std::int64_t>(spec.trials);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto x = synth_tensor(spec, static_cast<std::uint64_t>(t));
    const auto mags = sorted_abs(x);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double sigma = sorted_percentile(mags, grid[j]);
      double sq = 0.0;
      if (sigma > 0.0) {
        const double e = rms_quant_error(x, f, sigma);
        sq = e * e;
      } else {
        for (double v : x) sq += v * v;
        sq /= static_cast<double>(x.size());
      }
      mse[static_cast<std::size_t>(t) * grid.size() + j] = sq;
    }
  }
  ClippingResult out;
  std::vector<double> column(spec.trials);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (std::size_t t = 0; t < spec.trials; ++t) column[t] = mse[t * grid.size() + j];
    out.curve.push_back(summarize(grid[j], column));
  }
  const auto best = std::min_element(out.curve.begin(), out.curve.end(),
                                     [](const SweepPoint& a, const SweepPoint& b) { return a.mean < b.mean; });
  out.optimal_percentile = best->x;
  out.optimal_mse = best->mean;
  return out;
}

// ---------------------------------------------------------------------------
// entropy / switching

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ParamError("spearman: need two equal-length series");
  const auto ra = ranks(a), rb = ranks(b);
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) throw DomainError("spearman: a constant series has no rank correlation");
  return cov / std::sqrt(va * vb);
}

EntropySeries read_entropy_series(const std::filesystem::path& trace_csv) {
  std::ifstream in(trace_csv);
  if (!in) throw Error("cannot open trace '" + trace_csv.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace '" + trace_csv.string() + "' is empty", 0);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("trace is missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ce = column("entropy"), cs = column("switch_rms"), cu = column("policy_updated");
  EntropySeries out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) throw FormatError("short trace row", static_cast<std::size_t>(in.tellg()));
    if (cells[cu] != "1") continue;
    out.entropy.push_back(std::stod(cells[ce]));
    out.switching.push_back(std::stod(cells[cs]));
  }
  return out;
}

double entropy_switch_correlation(const EntropySeries& series) {
  if (series.entropy.size() != series.switching.size()) {
    throw ParamError("entropy and switching series differ in length");
  }
  if (series.entropy.size() < 100) {
    throw InsufficientDataError("entropy correlation needs at least 100 post-warmup steps, got " +
                                std::to_string(series.entropy.size()));
  }
  if (std::all_of(series.switching.begin(), series.switching.end(), [](double v) { return v == 0.0; })) {
    return 0.0;
  }
  const auto [lo, hi] = std::minmax_element(series.entropy.begin(), series.entropy.end());
  if (*lo == *hi) throw DomainError("entropy is constant over the trace; correlation is undefined");
  return spearman(series.entropy, series.switching);
}

}  // namespace fliqs
