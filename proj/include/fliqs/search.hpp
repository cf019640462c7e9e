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

// One-shot search: weight training, policy sampling and updates, two-phase
// quantization and serving of the argmax architecture.

#ifndef FLIQS_SEARCH_HPP_
#define FLIQS_SEARCH_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fliqs/controller.hpp"
#include "fliqs/costmodel.hpp"
#include "fliqs/data.hpp"
#include "fliqs/error.hpp"
#include "fliqs/network.hpp"

namespace fliqs {

struct TrainerParams {
  SgdParams sgd;
  bool cosine_lr = true;
  std::size_t batch_size = 64;
  std::size_t val_batch_size = 256;
  double validation_fraction = 0.1;
  std::size_t calibration_batches = 4;
  ClipMultiples clip;
  bool quantize = true;  // false: full-precision reference training
};

// Either an absolute BOPs value or a point between two uniform-format costs:
// cost(low) + mix * (cost(high) - cost(low)).
struct CostTarget {
  std::optional<double> gbops;
  NumericFormat low = NumericFormat::integer(4);
  NumericFormat high = NumericFormat::integer(8);
  double mix = 0.5;

  double resolve(const ModelManifest& manifest) const;
};

// Replaces the validation-batch accuracy when set.
using QualityOracle = std::function<double(std::span<const ArchChoice>)>;

struct SearchConfig {
  ModelConfig model;
  std::string search_space = "FLIQS-S-int";
  std::vector<NumericFormat> formats;  // empty: taken from search_space
  std::size_t total_steps = 500;
  double act_quant_start_fraction = 0.2;
  CostTarget cost_target;
  double gamma = -1.0;
  ControllerParams controller;
  TrainerParams trainer;
  std::uint64_t seed = 0;
  bool train_weights = true;
  QualityOracle quality_oracle;

  std::vector<NumericFormat> resolved_formats() const;
  void validate() const;
};

struct TraceRecord {
  std::uint64_t step = 0;
  double reward = 0.0;
  double quality = 0.0;
  double cost = 0.0;  // BOPs
  double entropy = 0.0;
  double beta = 0.0;
  double loss = 0.0;
  double advantage = 0.0;
  double switch_rms = 0.0;
  bool act_quant = false;
  bool kernel_joint = false;
  bool policy_updated = false;
  std::vector<ArchChoice> archs;
  std::vector<std::size_t> argmax;
  std::vector<double> pmax;
};

struct SearchResult {
  std::vector<std::string> layer_names;  // searchable layers, manifest order
  std::vector<ArchChoice> archs;
  std::vector<std::vector<double>> probabilities;
  std::vector<std::vector<ArchChoice>> options;
  std::vector<TraceRecord> trace;
  Network net;
  ThresholdTable thresholds;
  double cost = 0.0;  // served architecture, BOPs
  double cost_target = 0.0;
  double served_accuracy = 0.0;      // test set when available, else the validation split
  double validation_accuracy = 0.0;  // full validation split
  std::optional<double> test_accuracy;
  bool searched = true;
};

// A step failed; carries the failing step and the original message.
class SearchError : public Error {
 public:
  SearchError(std::uint64_t step, const std::string& what)
      : Error("search aborted at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

using TraceSink = std::function<void(const TraceRecord&)>;

SearchResult run_search(const SearchConfig& cfg, const Dataset& data, const Dataset* test = nullptr,
                        const TraceSink& sink = {});
// Same trainer path with a fixed architecture and no controller.
SearchResult run_fixed(const SearchConfig& cfg, std::span<const ArchChoice> archs, const Dataset& data,
                       const Dataset* test = nullptr, const TraceSink& sink = {});
SearchResult run_uniform(const SearchConfig& cfg, const NumericFormat& format, const Dataset& data,
                         const Dataset* test = nullptr, const TraceSink& sink = {});

// Trace CSV. Columns after `kernel_joint` are per searchable layer.
std::string trace_csv_header(std::span<const std::string> layer_names);
std::string trace_csv_row(const TraceRecord& r);

// Served architecture document (JSON).
std::string serve_config(const SearchResult& result);

struct ServedModel {
  ModelConfig model;
  std::vector<ArchChoice> archs;
  ThresholdTable thresholds;
};

ServedModel parse_served_config(const std::string& json_text);
// Accuracy of `net` under the served architecture with both quantization phases on.
double evaluate_served(const Network& net, const ServedModel& served, const Dataset& data);
double evaluate(const Network& net, std::span<const ArchChoice> archs, const ThresholdTable& table,
                const Dataset& data, std::span<const std::size_t> indices, std::size_t batch_size,
                bool quantized = true);

struct ParetoRow {
  double target = 0.0;  // BOPs
  std::uint64_t seed = 0;
  double cost = 0.0;
  double accuracy = 0.0;
  std::vector<ArchChoice> archs;
  std::string error;  // empty on success
};

// One search per (target, seed); rows ordered target-major. Runs `jobs`
// searches concurrently.
std::vector<ParetoRow> pareto_sweep(const SearchConfig& cfg, std::span<const double> targets_bops,
                                    std::span<const std::uint64_t> seeds, const Dataset& data,
                                    const Dataset* test = nullptr, std::size_t jobs = 1);

}  // namespace fliqs

#endif  // FLIQS_SEARCH_HPP_
