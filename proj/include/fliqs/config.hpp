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

// Run configuration: a strict JSON document merged over built-in defaults,
// with dotted-path overrides.

#ifndef FLIQS_CONFIG_HPP_
#define FLIQS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fliqs/analysis.hpp"
#include "fliqs/data.hpp"
#include "fliqs/search.hpp"

namespace fliqs {

struct DataConfig {
  std::string kind = "synth-digits";  // synth-digits | synth-blobs | idx | mnist
  std::uint64_t seed = 1;
  std::size_t train_size = 10000;  // idx/mnist: leading subset, 0 keeps all
  std::size_t test_size = 2000;
  std::size_t classes = 4;
  std::size_t dims = 8;
  std::size_t n_per_class = 500;
  std::size_t test_per_class = 200;
  double separation = 4.0;
  std::string train_images, train_labels, test_images, test_labels;
  std::string dir;
};

struct LoadedData {
  Dataset train;
  std::optional<Dataset> test;
};

LoadedData load_data(const DataConfig& cfg);

struct SweepConfig {
  std::vector<double> targets_gbops;
  std::vector<double> target_mixes;
  std::vector<std::uint64_t> seeds;
  std::vector<NumericFormat> formats;
};

struct AnalysisConfig {
  SynthSpec spec;
  std::vector<int> k1;
  int k2 = 8;
  ThresholdRule rule = ThresholdRule::Percentile999;
  std::vector<NumericFormat> formats;
  std::vector<double> percentiles;  // empty: 1..100
  std::size_t clipping_trials = 100;
  std::string trace;
};

struct RunConfig {
  std::string resolved_json;  // defaults + document + overrides, pretty-printed
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string log_level;
  std::string model_preset;  // empty when a model object is given
  std::optional<ModelConfig> model;
  DataConfig data;
  SearchConfig search;  // model left empty until resolve_model
  NumericFormat uniform_format = NumericFormat::integer(8);
  SweepConfig sweep;
  AnalysisConfig analysis;
};

// The default document; it doubles as the schema (every accepted key).
std::string default_config_json();

// Throws SchemaError naming the offending key path.
RunConfig resolve_config(const std::string& document, std::span<const std::string> overrides = {},
                         std::optional<std::uint64_t> seed = std::nullopt);
RunConfig load_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides = {},
                      std::optional<std::uint64_t> seed = std::nullopt);

// Presets take their input shape and class count from the training data.
ModelConfig resolve_model(const RunConfig& cfg, const Dataset& train);

// <root>/<command>-<UTC timestamp>-<seed>, with a numeric suffix when taken.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command,
                                   std::uint64_t seed);
// --out flag, else FLIQS_OUT, else the config's output_dir.
std::filesystem::path output_root(const std::optional<std::string>& flag, const RunConfig& cfg);

}  // namespace fliqs

#endif  // FLIQS_CONFIG_HPP_
