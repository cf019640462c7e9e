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

// Drives the fliqs binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;  // stdout and stderr
};

Outcome fliqs(const std::string& args) {
  const std::string cmd = std::string(FLIQS_CLI_PATH) + " " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("fliqs_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // The single run directory under root_ whose name starts with `prefix`.
  fs::path run_dir(const std::string& prefix) const {
    fs::path found;
    int n = 0;
    for (const auto& e : fs::directory_iterator(root_)) {
      if (e.path().filename().string().rfind(prefix, 0) == 0) {
        found = e.path();
        ++n;
      }
    }
    EXPECT_EQ(n, 1) << prefix;
    return found;
  }

  std::string out() const { return "-q -o " + root_.string(); }

  fs::path root_;
};

const std::string kBlobs = " --set model=\"mlp-2x64\" --set data.kind=\"synth-blobs\" --set trainer.batch_size=32";
const std::string kSmall = kBlobs + " --set search.total_steps=40";

TEST_F(CliTest, SearchWritesTheFiveRunFiles) {
  const Outcome r = fliqs("search" + kSmall + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path dir = run_dir("search-");
  for (const char* f : {"trace.csv", "result.json", "served_config.json", "weights.bin", "resolved_config.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(lines(read(dir / "trace.csv")).size(), 41u);
  EXPECT_NE(r.out.find(dir.string()), std::string::npos);
  const json result = json::parse(read(dir / "result.json"));
  EXPECT_EQ(result.at("layers").size(), 3u);
}

TEST_F(CliTest, UnknownKeyExitsTwoAndNamesIt) {
  const fs::path cfg = root_ / "bad.json";
  std::ofstream(cfg) << R"({"seed": 1, "foo": 3})";
  const Outcome r = fliqs("search --config " + cfg.string() + " " + out());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("foo"), std::string::npos) << r.out;
  const Outcome nested = fliqs("search --set search.foo=1 " + out());
  EXPECT_EQ(nested.code, 2);
  EXPECT_NE(nested.out.find("search.foo"), std::string::npos) << nested.out;
}

TEST_F(CliTest, BadValuesExitTwo) {
  EXPECT_EQ(fliqs("search --set search.total_steps=\"many\" " + out()).code, 2);
  EXPECT_EQ(fliqs("search --set search.search_space=\"FLIQS-XL\"" + kSmall + " " + out()).code, 2);
  EXPECT_EQ(fliqs("uniform --format INT99" + kSmall + " " + out()).code, 2);
  EXPECT_EQ(fliqs("search --config " + (root_ / "missing.json").string() + " " + out()).code, 2);
  EXPECT_EQ(fliqs("frobnicate").code, 2);
}

TEST_F(CliTest, SeedOverrideIsRecorded) {
  const Outcome r = fliqs("search --seed 17" + kSmall + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path dir = run_dir("search-");
  EXPECT_EQ(dir.filename().string().substr(dir.filename().string().size() - 3), "-17");
  const json resolved = json::parse(read(dir / "resolved_config.json"));
  EXPECT_EQ(resolved.at("seed").get<int>(), 17);
  EXPECT_EQ(resolved.at("search").at("total_steps").get<int>(), 40);
}

TEST_F(CliTest, ResolvedConfigReproducesTheTrace) {
  ASSERT_EQ(fliqs("search --seed 3" + kSmall + " " + out()).code, 0);
  const fs::path first = run_dir("search-");
  const fs::path again = root_ / "again";
  const Outcome r = fliqs("search --config " + (first / "resolved_config.json").string() + " -q -o " + again.string());
  ASSERT_EQ(r.code, 0) << r.out;
  fs::path second;
  for (const auto& e : fs::directory_iterator(again)) second = e.path();
  EXPECT_EQ(read(first / "trace.csv"), read(second / "trace.csv"));
}

TEST_F(CliTest, UniformWritesTheSameFiles) {
  const Outcome r = fliqs("uniform --format E4M3" + kSmall + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path dir = run_dir("uniform-");
  const json served = json::parse(read(dir / "served_config.json"));
  for (const auto& l : served.at("layers")) EXPECT_EQ(l.at("format").get<std::string>(), "E4M3");
  EXPECT_TRUE(fs::exists(dir / "weights.bin"));
}

TEST_F(CliTest, ServeInfoReproducesServedAccuracy) {
  ASSERT_EQ(fliqs("search" + kSmall + " " + out()).code, 0);
  const fs::path dir = run_dir("search-");
  const Outcome r = fliqs("serve-info " + (dir / "served_config.json").string() + " --weights " +
                      (dir / "weights.bin").string() + kSmall + " --json -q");
  ASSERT_EQ(r.code, 0) << r.out;
  const json info = json::parse(r.out);
  const json result = json::parse(read(dir / "result.json"));
  EXPECT_EQ(info.at("accuracy").get<double>(), result.at("served_accuracy").get<double>());
  EXPECT_EQ(info.at("layers").size(), 3u);
}

double total_gbops(const std::string& args) {
  const Outcome r = fliqs("cost " + args + " --json");
  EXPECT_EQ(r.code, 0) << r.out;
  return json::parse(r.out).at("total_gbops").get<double>();
}

TEST_F(CliTest, CostMatchesPublishedTotals) {
  EXPECT_NEAR(total_gbops("-m resnet18 -f BF16"), 467.7, 0.01 * 467.7);
  EXPECT_NEAR(total_gbops("-m resnet18 -f INT8"), 116.9, 0.01 * 116.9);
  EXPECT_NEAR(total_gbops("-m resnet18 -f INT4"), 29.23, 0.01 * 29.23);
  EXPECT_NEAR(total_gbops("-m mobilenetv2 -f BF16"), 77.00, 0.01 * 77.00);
  EXPECT_NEAR(total_gbops("-m " + std::string(FLIQS_SOURCE_DIR) + "/data/manifests/mobilenetv2.json -f INT8"),
              19.25, 0.01 * 19.25);
  const Outcome text = fliqs("cost -m resnet18 -f INT8");
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("total"), std::string::npos);
}

TEST_F(CliTest, PerLayerAssignmentLandsBetweenUniformTotals) {
  const fs::path a = root_ / "assign.json";
  std::ofstream(a) << R"({"default": "INT8", "layers": {"conv1": "BF16", "fc": "BF16"}})";
  const double mixed = total_gbops("-m resnet18 -a " + a.string());
  EXPECT_GT(mixed, total_gbops("-m resnet18 -f INT8"));
  EXPECT_LT(mixed, total_gbops("-m resnet18 -f BF16"));
}

TEST_F(CliTest, CostMismatchesExitTwo) {
  const fs::path a = root_ / "assign.json";
  std::ofstream(a) << R"({"layers": {"conv1": "BF16"}})";
  EXPECT_EQ(fliqs("cost -m resnet18 -a " + a.string()).code, 2);
  std::ofstream(a, std::ios::trunc) << R"({"default": "INT8", "layers": {"nope": "BF16"}})";
  EXPECT_EQ(fliqs("cost -m resnet18 -a " + a.string()).code, 2);
  EXPECT_EQ(fliqs("cost -m no-such-model -f INT8").code, 2);
  EXPECT_EQ(fliqs("cost -m resnet18").code, 2);
}

TEST_F(CliTest, SwitchingAnalysisWritesOneRowPerK1) {
  const Outcome r = fliqs("analyze switching --set analysis.trials=50 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path dir = run_dir("analyze-switching-");
  const auto rows = lines(read(dir / "switching.csv"));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "k1,mean,stderr");
  for (int k = 4; k <= 8; ++k) EXPECT_EQ(rows[static_cast<std::size_t>(k - 3)].rfind(std::to_string(k) + ",", 0), 0u);
  EXPECT_TRUE(json::parse(read(dir / "switching.json")).contains("fit"));
}

TEST_F(CliTest, BadDistributionExitsTwo) {
  EXPECT_EQ(fliqs("analyze switching --set analysis.distribution=\"cauchy\" " + out()).code, 2);
  EXPECT_EQ(fliqs("analyze spectra " + out()).code, 2);
}

TEST_F(CliTest, ClippingAnalysisReportsOptimalPercentiles) {
  const Outcome r = fliqs("analyze clipping --set analysis.clipping_trials=10 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const json side = json::parse(read(run_dir("analyze-clipping-") / "clipping.json"));
  ASSERT_EQ(side.at("formats").size(), 2u);
  for (const auto& f : side["formats"]) {
    EXPECT_GT(f.at("optimal_percentile").get<double>(), 0.0);
    EXPECT_LE(f.at("optimal_percentile").get<double>(), 100.0);
  }
}

TEST_F(CliTest, EntropyAnalysisReadsASearchTrace) {
  ASSERT_EQ(fliqs("search --set search.total_steps=200 --set controller.beta_end=0.5" + kBlobs + " " + out()).code, 0);
  const fs::path trace = run_dir("search-") / "trace.csv";
  const Outcome r = fliqs("analyze entropy --trace " + trace.string() + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(json::parse(read(run_dir("analyze-entropy-") / "entropy.json")).contains("spearman"));
}

TEST_F(CliTest, EmptyTargetListExitsTwo) {
  EXPECT_EQ(fliqs("sweep pareto --set sweep.target_mixes=[]" + kSmall + " " + out()).code, 2);
  EXPECT_EQ(fliqs("sweep uniform-formats --set sweep.formats=[]" + kSmall + " " + out()).code, 2);
}

TEST_F(CliTest, UniformFormatSweepEmitsFiveRows) {
  const Outcome r = fliqs("sweep uniform-formats --jobs 2" + kSmall + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const fs::path dir = run_dir("sweep-uniform-formats-");
  const auto rows = lines(read(dir / "results.csv"));
  ASSERT_EQ(rows.size(), 6u);
  const char* names[] = {"E1M6", "E2M5", "E3M4", "E4M3", "E5M2"};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(rows[i + 1].rfind(std::string(names[i]) + ",0,", 0), 0u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(fs::exists(dir / ("row" + std::to_string(i)) / "row.json"));
}

TEST_F(CliTest, ParetoSweepEmitsTargetTimesSeedRows) {
  const Outcome r = fliqs("sweep pareto --set sweep.seeds=[0,1,2] --set search.total_steps=20" +
                      kSmall + " " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(lines(read(run_dir("sweep-pareto-") / "results.csv")).size(), 10u);
}

TEST_F(CliTest, RunDirectoriesAreNeverReused) {
  ASSERT_EQ(fliqs("search" + kSmall + " " + out()).code, 0);
  ASSERT_EQ(fliqs("search" + kSmall + " " + out()).code, 0);
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root_)) ++n;
  EXPECT_EQ(n, 2u);
}

TEST_F(CliTest, OutputRootFollowsEnvironment) {
  const fs::path env_root = root_ / "from_env";
  const std::string cmd = "env FLIQS_OUT=" + env_root.string() + " " + std::string(FLIQS_CLI_PATH) +
                          " -q cost -m resnet18 -f INT8 > /dev/null && env FLIQS_OUT=" + env_root.string() + " " +
                          std::string(FLIQS_CLI_PATH) + " -q search" + kSmall + " > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  ASSERT_TRUE(fs::exists(env_root));
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(env_root)) ++n;
  EXPECT_EQ(n, 1u);
}

}  // namespace
