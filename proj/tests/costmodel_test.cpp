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

#include "fliqs/costmodel.hpp"

#include <gtest/gtest.h>

#include <random>

#include "fliqs/error.hpp"

namespace fliqs {
namespace {

const std::string kDataDir = std::string(FLIQS_SOURCE_DIR) + "/data/manifests/";

ArchChoice fmt(const char* name) { return ArchChoice{parse_format(name), 1.0, std::nullopt}; }

LayerSpec layer(std::string name, std::uint64_t macs) {
  LayerSpec l;
  l.name = std::move(name);
  l.macs = macs;
  return l;
}

TEST(LayerCost, Examples) {
  const auto l = layer("a", 1000);
  EXPECT_EQ(layer_cost(fmt("INT8"), l), 64000.0);
  EXPECT_EQ(layer_cost(fmt("BF16"), l), 256000.0);
  EXPECT_EQ(layer_cost(fmt("E2M1"), l), 16000.0);
}

TEST(LayerCost, MacTableLookup) {
  auto l = layer("a", 900);
  l.mac_table = {{1.0, 3, 900}, {0.5, 3, 450}, {1.0, 5, 2500}};
  EXPECT_EQ(layer_cost(ArchChoice{parse_format("INT4"), 0.5, 3}, l), 16.0 * 450);
  EXPECT_EQ(layer_cost(ArchChoice{parse_format("INT4"), 1.0, 5}, l), 16.0 * 2500);
  EXPECT_THROW(layer_cost(ArchChoice{parse_format("INT4"), 0.25, 3}, l), ManifestError);
  EXPECT_THROW(layer_cost(ArchChoice{parse_format("INT4"), 0.5, std::nullopt}, layer("b", 10)),
               ManifestError);
}

TEST(ModelCost, ResNet18MatchesPublishedTotals) {
  const auto m = load_manifest(kDataDir + "resnet18.json");
  EXPECT_EQ(m.layers.size(), 21u);
  EXPECT_NEAR(uniform_cost(m, parse_format("BF16")) / 1e9, 467.7, 0.01 * 467.7);
  EXPECT_NEAR(uniform_cost(m, parse_format("INT8")) / 1e9, 116.9, 0.01 * 116.9);
  EXPECT_NEAR(uniform_cost(m, parse_format("INT4")) / 1e9, 29.23, 0.01 * 29.23);
  EXPECT_DOUBLE_EQ(uniform_cost(m, parse_format("INT4")) * 16.0, uniform_cost(m, parse_format("BF16")));
}

TEST(ModelCost, MobileNetV2MatchesPublishedTotals) {
  const auto m = load_manifest(kDataDir + "mobilenetv2.json");
  EXPECT_NEAR(uniform_cost(m, parse_format("BF16")) / 1e9, 77.00, 0.01 * 77.00);
  EXPECT_NEAR(uniform_cost(m, parse_format("INT8")) / 1e9, 19.25, 0.01 * 19.25);
  EXPECT_NEAR(uniform_cost(m, parse_format("INT4")) / 1e9, 4.81, 0.01 * 4.81);
}

TEST(ModelCost, QuadraticLinearAndUniform) {
  std::mt19937_64 rng(3);
  ModelManifest m;
  m.model_name = "toy";
  std::uint64_t total = 0;
  for (int i = 0; i < 6; ++i) {
    m.layers.push_back(layer("l" + std::to_string(i), rng() % 100000));
    total += m.layers.back().macs;
  }
  const char* pairs[][2] = {{"INT2", "INT4"}, {"INT4", "INT8"}, {"INT8", "INT16"}, {"E2M1", "E4M3"}};
  for (auto& p : pairs) {
    EXPECT_DOUBLE_EQ(uniform_cost(m, parse_format(p[1])), 4.0 * uniform_cost(m, parse_format(p[0])));
  }
  for (const char* f : {"INT3", "INT6", "E3M2", "BF16"}) {
    const double b = total_bitwidth(parse_format(f));
    EXPECT_EQ(uniform_cost(m, parse_format(f)), b * b * static_cast<double>(total));
  }
  std::vector<ArchChoice> archs;
  for (int i = 0; i < 6; ++i) archs.push_back(fmt(i % 2 ? "INT4" : "INT8"));
  const auto per = layer_costs(archs, m);
  double sum = 0.0;
  for (double c : per) sum += c;
  EXPECT_EQ(model_cost(archs, m), sum);
  auto doubled = m;
  doubled.layers[2].macs *= 2;
  EXPECT_DOUBLE_EQ(model_cost(archs, doubled) - model_cost(archs, m), per[2]);
}

TEST(ModelCost, FixedLayersUseTheirFormat) {
  ModelManifest m;
  m.model_name = "toy";
  m.layers = {layer("a", 100), layer("b", 10)};
  m.layers[1].searchable = false;
  m.layers[1].fixed_format = parse_format("INT8");
  const std::vector<ArchChoice> archs = {fmt("INT4")};
  EXPECT_EQ(model_cost(archs, m), 16.0 * 100 + 64.0 * 10);
  const std::vector<ArchChoice> wrong = {fmt("INT4"), fmt("INT4")};
  EXPECT_THROW(model_cost(wrong, m), ManifestError);
}

TEST(Reward, Examples) {
  const RewardParams p{100.0, -1.0};
  EXPECT_DOUBLE_EQ(reward(0.7, 100.0, p), 0.7);
  EXPECT_DOUBLE_EQ(reward(0.7, 100.0, RewardParams{100.0, -3.0}), 0.7);
  EXPECT_NEAR(reward(0.7, 150.0, p), 0.2, 1e-15);
  EXPECT_NEAR(reward(0.7, 50.0, p), 0.2, 1e-15);
  EXPECT_THROW(reward(0.7, 1.0, RewardParams{0.0, -1.0}), ParamError);
}

TEST(Reward, DecreasesWithDistanceFromTarget) {
  const RewardParams p{1000.0, -0.5};
  double prev_hi = reward(0.5, 1000.0, p), prev_lo = prev_hi;
  for (double d = 10.0; d < 1000.0; d += 10.0) {
    const double hi = reward(0.5, 1000.0 + d, p), lo = reward(0.5, 1000.0 - d, p);
    EXPECT_LT(hi, prev_hi);
    EXPECT_LT(lo, prev_lo);
    prev_hi = hi;
    prev_lo = lo;
  }
}

TEST(Manifest, RoundTrip) {
  const auto m = load_manifest(kDataDir + "resnet18.json");
  const auto again = parse_manifest(manifest_to_json(m));
  ASSERT_EQ(again.layers.size(), m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    EXPECT_EQ(again.layers[i].name, m.layers[i].name);
    EXPECT_EQ(again.layers[i].macs, m.layers[i].macs);
  }
  EXPECT_EQ(mac_table_key(0.5, 3), "w0.5_k3");
}

TEST(Manifest, SchemaErrors) {
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[]})"), SchemaError);
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":1},{"name":"a","macs":2}]})"),
               SchemaError);
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":-1}]})"), SchemaError);
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[{"name":"a"}]})"), SchemaError);
  EXPECT_THROW(parse_manifest(R"({"layers":[{"name":"a","macs":1}]})"), SchemaError);
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":1,"foo":1}]})"),
               SchemaError);
  EXPECT_THROW(parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":1,"searchable":false}]})"),
               ConfigError);
  EXPECT_THROW(parse_manifest("{not json"), SchemaError);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), SchemaError);
  try {
    parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":1},{"name":"b","macs":"z"}]})");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("layers[1]"), std::string::npos) << e.what();
  }
}

TEST(Manifest, MacTableMustContainIdentity) {
  EXPECT_THROW(
      parse_manifest(R"({"model_name":"x","layers":[{"name":"a","macs":10,"mac_table":{"w0.5_k3":5}}]})"),
      ConfigError);
  const auto m = parse_manifest(
      R"({"model_name":"x","layers":[{"name":"a","macs":10,"mac_table":{"w1_k3":10,"w0.5_k3":5}}]})");
  EXPECT_EQ(m.layers[0].mac_table.size(), 2u);
}

}  // namespace
}  // namespace fliqs
