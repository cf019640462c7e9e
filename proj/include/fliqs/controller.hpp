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

// Per-layer categorical policies trained with REINFORCE against a running
// reward average, plus the entropy measurement and its regularization
// schedule.

#ifndef FLIQS_CONTROLLER_HPP_
#define FLIQS_CONTROLLER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fliqs/arch.hpp"

namespace fliqs {

struct LayerPolicy {
  std::vector<ArchChoice> options;
  std::vector<double> logits;  // theta_{l,alpha}, one per option

  // Uniform logits over the options.
  static LayerPolicy uniform(std::vector<ArchChoice> options);
};

std::vector<double> policy_probs(const LayerPolicy& p);
double policy_entropy(std::span<const double> probs);

enum class BetaSchedule { Constant, Cosine };
enum class PolicyOptimizer { Adam, Sgd };

BetaSchedule parse_beta_schedule(std::string_view name);
PolicyOptimizer parse_policy_optimizer(std::string_view name);

// Cosine: -0.5*beta_end*(1 + cos(pi*s)) + beta_end. s is clamped to [0, 1].
double beta_schedule(double progress, double beta_end, BetaSchedule kind);

struct ControllerParams {
  double lr = 4.6e-3;
  double beta_end = 0.5;
  BetaSchedule schedule = BetaSchedule::Cosine;
  double warmup_fraction = 0.25;
  double ema_decay = 0.9;
  PolicyOptimizer optimizer = PolicyOptimizer::Adam;
  double adam_beta1 = 0.95;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

// The scalar the policy ascends:
//   advantage * sum_l log pi_l(choice_l) - beta * H_M
// Exposed so the analytic gradient can be checked against finite differences.
double policy_objective(std::span<const LayerPolicy> policies, std::span<const std::size_t> choice,
                        double advantage, double beta);

// d(policy_objective)/d(logits), one vector per layer.
std::vector<std::vector<double>> policy_objective_gradient(std::span<const LayerPolicy> policies,
                                                           std::span<const std::size_t> choice,
                                                           double advantage, double beta);

class Controller {
 public:
  Controller(std::vector<LayerPolicy> policies, ControllerParams params);

  const std::vector<LayerPolicy>& policies() const noexcept { return policies_; }
  const ControllerParams& params() const noexcept { return params_; }
  std::size_t layers() const noexcept { return policies_.size(); }

  bool in_warmup(double progress) const noexcept { return progress < params_.warmup_fraction; }

  // Option indices for one step. Uniform during warmup, otherwise inverse-CDF
  // draws from the softmax. Depends only on (seed, step, progress, logits).
  std::vector<std::size_t> sample(std::uint64_t step, double progress) const;
  std::vector<ArchChoice> choices(std::span<const std::size_t> indices) const;

  // Returns r - r_bar, then folds r into the running average. The average
  // starts at the first observed reward.
  double advantage_update(double reward);
  std::optional<double> reward_average() const noexcept { return reward_avg_; }

  // One optimizer step on the logits.
  void reinforce_step(std::span<const std::size_t> choice, double advantage, double beta);

  double entropy() const;
  std::vector<std::size_t> argmax() const;
  std::vector<std::vector<double>> probabilities() const;

  void set_logits(std::size_t layer, std::vector<double> logits);

 private:
  std::vector<LayerPolicy> policies_;
  ControllerParams params_;
  std::optional<double> reward_avg_;
  std::vector<std::vector<double>> adam_m_, adam_v_;
  std::uint64_t adam_t_ = 0;
};

}  // namespace fliqs

#endif  // FLIQS_CONTROLLER_HPP_
