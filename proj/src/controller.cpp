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

#include "fliqs/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "fliqs/error.hpp"
#include "fliqs/rng.hpp"

namespace fliqs {

namespace {

std::vector<double> log_softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double t : logits) sum += std::exp(t - top);
  const double log_sum = std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = (logits[j] - top) - log_sum;
  return out;
}

void check_choice(std::span<const LayerPolicy> policies, std::span<const std::size_t> choice) {
  if (choice.size() != policies.size()) {
    throw ParamError("policy update: expected one choice per layer");
  }
  for (std::size_t l = 0; l < policies.size(); ++l) {
    if (choice[l] >= policies[l].logits.size()) {
      throw ParamError("policy update: choice index out of range in layer " + std::to_string(l));
    }
  }
}

}  // namespace

LayerPolicy LayerPolicy::uniform(std::vector<ArchChoice> options) {
  LayerPolicy p;
  p.logits.assign(options.size(), 0.0);
  p.options = std::move(options);
  return p;
}

std::vector<double> policy_probs(const LayerPolicy& p) {
  auto logp = log_softmax(p.logits);
  for (auto& v : logp) v = std::exp(v);
  return logp;
}

double policy_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

BetaSchedule parse_beta_schedule(std::string_view name) {
  if (name == "cosine") return BetaSchedule::Cosine;
  if (name == "constant") return BetaSchedule::Constant;
  throw ParseError(std::string(name), "schedule must be 'cosine' or 'constant'");
}

PolicyOptimizer parse_policy_optimizer(std::string_view name) {
  if (name == "adam") return PolicyOptimizer::Adam;
  if (name == "sgd") return PolicyOptimizer::Sgd;
  throw ParseError(std::string(name), "policy optimizer must be 'adam' or 'sgd'");
}

double beta_schedule(double progress, double beta_end, BetaSchedule kind) {
  if (progress < 0.0 || progress > 1.0) {
    spdlog::warn("beta_schedule: progress {} outside [0, 1], clamping", progress);
    progress = std::clamp(progress, 0.0, 1.0);
  }
  if (kind == BetaSchedule::Constant) return beta_end;
  return -0.5 * beta_end * (1.0 + std::cos(std::numbers::pi * progress)) + beta_end;
}

double policy_objective(std::span<const LayerPolicy> policies, std::span<const std::size_t> choice,
                        double advantage, double beta) {
  check_choice(policies, choice);
  double log_prob = 0.0, entropy = 0.0;
  for (std::size_t l = 0; l < policies.size(); ++l) {
    const auto logp = log_softmax(policies[l].logits);
    log_prob += logp[choice[l]];
    for (double lp : logp) entropy -= std::exp(lp) * lp;
  }
  return advantage * log_prob - beta * entropy;
}

std::vector<std::vector<double>> policy_objective_gradient(std::span<const LayerPolicy> policies,
                                                           std::span<const std::size_t> choice,
                                                           double advantage, double beta) {
  check_choice(policies, choice);
  std::vector<std::vector<double>> grad(policies.size());
  for (std::size_t l = 0; l < policies.size(); ++l) {
    const auto logp = log_softmax(policies[l].logits);
    double h = 0.0;
    for (double lp : logp) h -= std::exp(lp) * lp;
    grad[l].resize(logp.size());
    for (std::size_t j = 0; j < logp.size(); ++j) {
      const double p = std::exp(logp[j]);
      const double score = (j == choice[l] ? 1.0 : 0.0) - p;
      // dH/dtheta_j = -p_j (log p_j + H); the entropy enters with weight -beta.
      grad[l][j] = advantage * score + beta * p * (logp[j] + h);
    }
  }
  return grad;
}

Controller::Controller(std::vector<LayerPolicy> policies, ControllerParams params)
    : policies_(std::move(policies)), params_(params) {
  if (!(params_.lr > 0.0)) throw ParamError("controller learning rate must be positive");
  if (!(params_.warmup_fraction > 0.0 && params_.warmup_fraction < 1.0)) {
    throw ParamError("warmup_fraction must lie in (0, 1)");
  }
  if (!(params_.ema_decay >= 0.0 && params_.ema_decay < 1.0)) {
    throw ParamError("ema_decay must lie in [0, 1)");
  }
  if (params_.beta_end < 0.0) throw ParamError("beta_end must be non-negative");
  for (std::size_t l = 0; l < policies_.size(); ++l) {
    const auto& p = policies_[l];
    if (p.options.empty() || p.options.size() != p.logits.size()) {
      throw ParamError("layer policy " + std::to_string(l) + " needs one logit per option");
    }
    for (double t : p.logits) {
      if (!std::isfinite(t)) throw ParamError("layer policy logits must be finite");
    }
    adam_m_.emplace_back(p.logits.size(), 0.0);
    adam_v_.emplace_back(p.logits.size(), 0.0);
  }
}

std::vector<std::size_t> Controller::sample(std::uint64_t step, double progress) const {
  Rng rng = make_rng(params_.seed, streams::kController, step);
  const bool uniform = in_warmup(progress);
  std::vector<std::size_t> picks(policies_.size());
  for (std::size_t l = 0; l < policies_.size(); ++l) {
    const std::size_t k = policies_[l].options.size();
    const double u = uniform01(rng);
    if (uniform) {
      picks[l] = std::min(static_cast<std::size_t>(u * static_cast<double>(k)), k - 1);
      continue;
    }
    const auto probs = policy_probs(policies_[l]);
    double cdf = 0.0;
    picks[l] = k - 1;
    for (std::size_t j = 0; j < k; ++j) {
      cdf += probs[j];
      if (u < cdf) {
        picks[l] = j;
        break;
      }
    }
  }
  return picks;
}

std::vector<ArchChoice> Controller::choices(std::span<const std::size_t> indices) const {
  check_choice(policies_, indices);
  std::vector<ArchChoice> out;
  out.reserve(indices.size());
  for (std::size_t l = 0; l < indices.size(); ++l) out.push_back(policies_[l].options[indices[l]]);
  return out;
}

double Controller::advantage_update(double reward) {
  if (!std::isfinite(reward)) throw DomainError("advantage_update: non-finite reward");
  if (!reward_avg_) reward_avg_ = reward;
  const double advantage = reward - *reward_avg_;
  reward_avg_ = params_.ema_decay * *reward_avg_ + (1.0 - params_.ema_decay) * reward;
  return advantage;
}

void Controller::reinforce_step(std::span<const std::size_t> choice, double advantage,
                                double beta) {
  const auto grad = policy_objective_gradient(policies_, choice, advantage, beta);
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(params_.adam_beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(params_.adam_beta2, static_cast<double>(adam_t_));
  for (std::size_t l = 0; l < policies_.size(); ++l) {
    auto& logits = policies_[l].logits;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double g = grad[l][j];
      if (params_.optimizer == PolicyOptimizer::Sgd) {
        logits[j] += params_.lr * g;
        continue;
      }
      auto& m = adam_m_[l][j];
      auto& v = adam_v_[l][j];
      m = params_.adam_beta1 * m + (1.0 - params_.adam_beta1) * g;
      v = params_.adam_beta2 * v + (1.0 - params_.adam_beta2) * g * g;
      logits[j] += params_.lr * (m / bc1) / (std::sqrt(v / bc2) + params_.adam_eps);
    }
  }
}

double Controller::entropy() const {
  double h = 0.0;
  for (const auto& p : policies_) h += policy_entropy(policy_probs(p));
  return h;
}

std::vector<std::size_t> Controller::argmax() const {
  std::vector<std::size_t> out;
  out.reserve(policies_.size());
  for (const auto& p : policies_) {
    out.push_back(static_cast<std::size_t>(
        std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin()));
  }
  return out;
}

std::vector<std::vector<double>> Controller::probabilities() const {
  std::vector<std::vector<double>> out;
  out.reserve(policies_.size());
  for (const auto& p : policies_) out.push_back(policy_probs(p));
  return out;
}

void Controller::set_logits(std::size_t layer, std::vector<double> logits) {
  if (layer >= policies_.size() || logits.size() != policies_[layer].options.size()) {
    throw ParamError("set_logits: shape mismatch");
  }
  policies_[layer].logits = std::move(logits);
}

}  // namespace fliqs
