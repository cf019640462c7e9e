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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fliqs/error.hpp"
#include "support/oracles.hpp"

namespace fliqs {
namespace {

std::vector<ArchChoice> options(std::size_t n) {
  std::vector<ArchChoice> o(n);
  const char* names[] = {"INT4", "INT8", "BF16", "INT6", "E4M3"};
  for (std::size_t i = 0; i < n; ++i) o[i].format = parse_format(names[i % 5]);
  return o;
}

LayerPolicy with_logits(std::vector<double> logits) {
  LayerPolicy p = LayerPolicy::uniform(options(logits.size()));
  p.logits = std::move(logits);
  return p;
}

ControllerParams sgd_params(double lr) {
  ControllerParams p;
  p.lr = lr;
  p.optimizer = PolicyOptimizer::Sgd;
  return p;
}

TEST(PolicyProbs, Examples) {
  const auto u = policy_probs(with_logits({0, 0, 0}));
  for (double p : u) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  const auto two = policy_probs(with_logits({std::log(2.0), 0}));
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-15);
  for (double t : {-50.0, 3.0, 700.0}) {
    for (double p : policy_probs(with_logits({t, t, t}))) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  }
}

TEST(PolicyProbs, ShiftInvariance) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> logits = {n(rng), n(rng), n(rng), n(rng)};
    auto shifted = logits;
    const double c = n(rng) * 10;
    for (auto& v : shifted) v += c;
    const auto p = policy_probs(with_logits(logits)), q = policy_probs(with_logits(shifted));
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_NEAR(p[j], q[j], 1e-12);
      EXPECT_GT(p[j], 0.0);
      sum += p[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(policy_entropy(p), policy_entropy(q), 1e-12);
  }
}

TEST(Entropy, Examples) {
  Controller one({LayerPolicy::uniform(options(3))}, {});
  EXPECT_NEAR(one.entropy(), std::log(3.0), 1e-12);
  Controller four(std::vector<LayerPolicy>(4, LayerPolicy::uniform(options(3))), {});
  EXPECT_NEAR(four.entropy(), 4 * std::log(3.0), 1e-12);
  Controller peaked({with_logits({60, 0, 0})}, {});
  EXPECT_LT(peaked.entropy(), 1e-20);
}

TEST(Sampling, WarmupIsUniform) {
  ControllerParams params;
  params.seed = 4;
  Controller c({with_logits({5, 0, -5})}, params);
  std::vector<int> counts(3, 0);
  for (std::uint64_t t = 0; t < 30000; ++t) ++counts[c.sample(t, 0.1)[0]];
  for (int n : counts) EXPECT_NEAR(n / 30000.0, 1.0 / 3.0, 0.01);
}

TEST(Sampling, FollowsPolicyAfterWarmup) {
  Controller c({with_logits({10, -10})}, {});
  int zero = 0;
  for (std::uint64_t t = 0; t < 10000; ++t) zero += c.sample(t, 0.5)[0] == 0 ? 1 : 0;
  EXPECT_GT(zero / 10000.0, 0.999);
  Controller mixed({with_logits({std::log(3.0), 0})}, {});
  int first = 0;
  for (std::uint64_t t = 0; t < 40000; ++t) first += mixed.sample(t, 0.9)[0] == 0 ? 1 : 0;
  EXPECT_NEAR(first / 40000.0, 0.75, 0.01);
}

TEST(Sampling, DeterministicPerSeedAndStep) {
  ControllerParams params;
  params.seed = 9;
  Controller a(std::vector<LayerPolicy>(3, LayerPolicy::uniform(options(3))), params);
  Controller b(std::vector<LayerPolicy>(3, LayerPolicy::uniform(options(3))), params);
  bool any_diff = false;
  for (std::uint64_t t = 0; t < 50; ++t) {
    EXPECT_EQ(a.sample(t, 0.5), b.sample(t, 0.5));
    any_diff = any_diff || a.sample(t, 0.5) != a.sample(t + 1, 0.5);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Advantage, Examples) {
  Controller c({LayerPolicy::uniform(options(2))}, {});
  EXPECT_EQ(c.advantage_update(0.5), 0.0);
  EXPECT_DOUBLE_EQ(*c.reward_average(), 0.5);

  Controller d({LayerPolicy::uniform(options(2))}, {});
  d.advantage_update(0.4);
  EXPECT_NEAR(d.advantage_update(0.5), 0.1, 1e-15);
  EXPECT_NEAR(*d.reward_average(), 0.41, 1e-15);

  Controller e({LayerPolicy::uniform(options(2))}, {});
  e.advantage_update(0.0);
  double adv = 1.0;
  for (int i = 0; i < 400; ++i) adv = e.advantage_update(0.8);
  EXPECT_LT(std::fabs(adv), 1e-15);
}

TEST(Reinforce, PlainGradientStep) {
  Controller c({LayerPolicy::uniform(options(2))}, sgd_params(1.0));
  const std::vector<std::size_t> choice = {0};
  c.reinforce_step(choice, 1.0, 0.0);
  EXPECT_NEAR(c.policies()[0].logits[0], 0.5, 1e-15);
  EXPECT_NEAR(c.policies()[0].logits[1], -0.5, 1e-15);
}

TEST(Reinforce, ZeroSignalLeavesLogits) {
  for (auto opt : {PolicyOptimizer::Sgd, PolicyOptimizer::Adam}) {
    ControllerParams p;
    p.optimizer = opt;
    Controller c({with_logits({0.3, -0.2, 1.0})}, p);
    const std::vector<std::size_t> choice = {2};
    c.reinforce_step(choice, 0.0, 0.0);
    EXPECT_EQ(c.policies()[0].logits, (std::vector<double>{0.3, -0.2, 1.0}));
  }
}

TEST(Reinforce, EntropyTermSharpensPeakedPolicy) {
  Controller c({with_logits({5, -5})}, sgd_params(0.1));
  const double h0 = c.entropy();
  const std::vector<std::size_t> choice = {0};
  c.reinforce_step(choice, 0.0, 0.5);
  const auto& l = c.policies()[0].logits;
  EXPECT_GT(l[0] - l[1], 10.0);
  EXPECT_LT(c.entropy(), h0);
}

TEST(Reinforce, AnalyticGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LayerPolicy> policies;
    std::vector<std::size_t> choice;
    for (int l = 0; l < 3; ++l) {
      const std::size_t k = 2 + rng() % 3;
      std::vector<double> logits(k);
      for (auto& v : logits) v = n(rng);
      policies.push_back(with_logits(logits));
      choice.push_back(rng() % k);
    }
    const double adv = u(rng), beta = std::fabs(u(rng));
    const auto g = policy_objective_gradient(policies, choice, adv, beta);
    const auto fd = oracle::policy_gradient_fd(policies, choice, adv, beta, 1e-5);
    for (std::size_t l = 0; l < g.size(); ++l)
      for (std::size_t j = 0; j < g[l].size(); ++j)
        EXPECT_LE(std::fabs(g[l][j] - fd[l][j]), 1e-5 * std::max(1e-3, std::fabs(fd[l][j])));
  }
}

TEST(BetaSchedule, Endpoints) {
  EXPECT_EQ(beta_schedule(0.0, 0.5, BetaSchedule::Cosine), 0.0);
  EXPECT_EQ(beta_schedule(1.0, 0.5, BetaSchedule::Cosine), 0.5);
  EXPECT_EQ(beta_schedule(0.5, 0.5, BetaSchedule::Cosine), 0.25);
  EXPECT_EQ(beta_schedule(0.5, 0.3, BetaSchedule::Cosine), 0.15);
  EXPECT_EQ(beta_schedule(0.3, 0.5, BetaSchedule::Constant), 0.5);
  EXPECT_EQ(beta_schedule(-1.0, 0.5, BetaSchedule::Cosine), 0.0);
  EXPECT_EQ(beta_schedule(2.0, 0.5, BetaSchedule::Cosine), 0.5);
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double b = beta_schedule(i / 100.0, 0.5, BetaSchedule::Cosine);
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(Parse, NamesAndErrors) {
  EXPECT_EQ(parse_beta_schedule("cosine"), BetaSchedule::Cosine);
  EXPECT_EQ(parse_beta_schedule("constant"), BetaSchedule::Constant);
  EXPECT_EQ(parse_policy_optimizer("adam"), PolicyOptimizer::Adam);
  EXPECT_THROW(parse_beta_schedule("linear"), ConfigError);
  EXPECT_THROW(parse_policy_optimizer("ppo"), ConfigError);
  ControllerParams bad;
  bad.lr = 0.0;
  EXPECT_THROW(Controller({LayerPolicy::uniform(options(2))}, bad), ParamError);
  EXPECT_THROW(Controller({LayerPolicy::uniform({})}, {}), ConfigError);
  Controller single({LayerPolicy::uniform(options(1))}, {});
  EXPECT_EQ(single.sample(3, 0.9), (std::vector<std::size_t>{0}));
  EXPECT_EQ(single.entropy(), 0.0);
}

TEST(Bandit, ConvergesForSeeds0To9) {
  const std::vector<std::size_t> designated = {2, 0, 1};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ControllerParams p;
    p.seed = seed;
    const auto out = oracle::run_bandit(designated, 3, 5000, p);
    EXPECT_EQ(out.argmax, designated) << "seed " << seed;
    for (double pm : out.pmax) EXPECT_GT(pm, 0.9) << "seed " << seed;
  }
}

TEST(Bandit, EntropyRegularizationLowersFinalEntropy) {
  const std::vector<std::size_t> designated = {1, 1, 2};
  ControllerParams on, off;
  on.beta_end = 0.5;
  off.beta_end = 0.0;
  const auto a = oracle::run_bandit(designated, 3, 2000, on);
  const auto b = oracle::run_bandit(designated, 3, 2000, off);
  EXPECT_LT(a.final_entropy, b.final_entropy);
}

}  // namespace
}  // namespace fliqs
