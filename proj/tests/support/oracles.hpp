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

// Independent reference implementations used by unit and acceptance tests.

#ifndef FLIQS_TESTS_SUPPORT_ORACLES_HPP_
#define FLIQS_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fliqs/controller.hpp"
#include "fliqs/numerics.hpp"

namespace fliqs::oracle {

// Every format with total bitwidth <= 8: INT2..INT8 and E(e)M(m), m >= 1.
inline std::vector<NumericFormat> enumerable_formats() {
  std::vector<NumericFormat> out;
  for (int k = 2; k <= 8; ++k) out.push_back(NumericFormat::integer(k));
  for (int e = 1; e <= 6; ++e) {
    for (int m = 1; e + m <= 7; ++m) out.push_back(NumericFormat::minifloat(e, m));
  }
  return out;
}

// Non-negative codes of an enumerable format at unit scale, built directly
// from the bit-pattern definitions (bias 2^(e-1), subnormals at E = 0).
inline std::vector<double> nonnegative_codes(const NumericFormat& f) {
  std::vector<double> v;
  if (f.is_int()) {
    const int top = (1 << (f.int_bits() - 1)) - 1;
    for (int i = 0; i <= top; ++i) v.push_back(i);
    return v;
  }
  const int e = f.exponent_bits(), m = f.mantissa_bits();
  const int bias = 1 << (e - 1);
  for (int ex = 0; ex < (1 << e); ++ex) {
    for (int mant = 0; mant < (1 << m); ++mant) {
      const double frac = static_cast<double>(mant) / static_cast<double>(1 << m);
      v.push_back(ex == 0 ? std::ldexp(frac, 1 - bias) : std::ldexp(1.0 + frac, ex - bias));
    }
  }
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Clip to [-sigma, sigma], scale so sigma maps to the largest code, pick the
// nearest code by exhaustive search. Ties go to the even code index, which is
// the even integer or even mantissa because code parity alternates along the
// sorted list.
inline double brute_force_quantize(double x, std::span<const double> codes, double sigma) {
  const double top = codes.back();
  const double mag = std::min(std::fabs(x), sigma) * (top / sigma);
  std::size_t best = 0;
  double best_d = std::fabs(codes[0] - mag);
  for (std::size_t i = 1; i < codes.size(); ++i) {
    const double d = std::fabs(codes[i] - mag);
    if (d < best_d || (d == best_d && i % 2 == 0)) {
      best = i;
      best_d = d;
    }
  }
  const double q = codes[best] * (sigma / top);
  return x < 0 ? -q : q;
}

// Central finite differences of the policy objective w.r.t. every logit.
inline std::vector<std::vector<double>> policy_gradient_fd(std::vector<LayerPolicy> policies,
                                                           std::span<const std::size_t> choice,
                                                           double advantage, double beta, double h) {
  std::vector<std::vector<double>> g(policies.size());
  for (std::size_t l = 0; l < policies.size(); ++l) {
    for (std::size_t j = 0; j < policies[l].logits.size(); ++j) {
      const double saved = policies[l].logits[j];
      policies[l].logits[j] = saved + h;
      const double up = policy_objective(policies, choice, advantage, beta);
      policies[l].logits[j] = saved - h;
      const double down = policy_objective(policies, choice, advantage, beta);
      policies[l].logits[j] = saved;
      g[l].push_back((up - down) / (2 * h));
    }
  }
  return g;
}

struct BanditOutcome {
  std::vector<std::size_t> argmax;
  std::vector<double> pmax;
  double final_entropy = 0.0;
};

// Layers x options bandit: reward 1 when every layer picks its designated
// option, else 0.
inline BanditOutcome run_bandit(std::span<const std::size_t> designated, std::size_t options,
                                std::size_t steps, ControllerParams params) {
  std::vector<LayerPolicy> policies;
  for (std::size_t l = 0; l < designated.size(); ++l) {
    std::vector<ArchChoice> opts(options);
    for (std::size_t j = 0; j < options; ++j) opts[j].width_mult = 1.0 / static_cast<double>(j + 1);
    policies.push_back(LayerPolicy::uniform(std::move(opts)));
  }
  Controller c(std::move(policies), params);
  for (std::size_t t = 0; t < steps; ++t) {
    const double progress = static_cast<double>(t) / static_cast<double>(steps);
    const auto idx = c.sample(t, progress);
    bool hit = true;
    for (std::size_t l = 0; l < idx.size(); ++l) hit = hit && idx[l] == designated[l];
    const double adv = c.advantage_update(hit ? 1.0 : 0.0);
    if (!c.in_warmup(progress)) {
      c.reinforce_step(idx, adv, beta_schedule(progress, params.beta_end, params.schedule));
    }
  }
  BanditOutcome out;
  out.argmax = c.argmax();
  for (const auto& p : c.probabilities()) out.pmax.push_back(*std::max_element(p.begin(), p.end()));
  out.final_entropy = c.entropy();
  return out;
}

}  // namespace fliqs::oracle

#endif  // FLIQS_TESTS_SUPPORT_ORACLES_HPP_
