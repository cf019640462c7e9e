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

// A small differentiable network stack with fake quantization.
//
// Every weight layer (dense, conv, depthwise conv) owns a single set of
// full-precision master weights. The forward pass builds a quantized,
// channel-masked view of them from the per-layer ArchChoice; gradients flow
// back through a clipped straight-through estimator. Conv layers searched
// over kernel sizes keep one weight branch per kernel size.

#ifndef FLIQS_NETWORK_HPP_
#define FLIQS_NETWORK_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fliqs/arch.hpp"
#include "fliqs/costmodel.hpp"
#include "fliqs/tensor.hpp"

namespace fliqs {

enum class LayerType { Dense, Conv, DepthwiseConv, Relu, MaxPool, AvgPool, Flatten };

struct LayerConfig {
  LayerType type = LayerType::Dense;
  std::string name;
  std::size_t in = 0;    // dense/conv input features or channels
  std::size_t out = 0;   // dense/conv output features or channels
  int kernel = 1;        // conv base kernel
  std::size_t stride = 1;
  std::size_t pool = 2;  // max-pool window
  bool searchable = true;
  std::optional<NumericFormat> fixed_format;  // for non-searchable weight layers
  std::vector<double> width_options{1.0};
  std::vector<int> kernel_options;  // empty = base kernel only

  bool has_weights() const noexcept {
    return type == LayerType::Dense || type == LayerType::Conv || type == LayerType::DepthwiseConv;
  }
};

struct ModelConfig {
  std::string name;
  std::vector<std::size_t> input_shape;  // per example, e.g. {1, 28, 28} or {8}
  std::vector<LayerConfig> layers;
};

// "mlp-2x64", "mlp-3x128", "cnn-small"
ModelConfig preset_model(const std::string& name, const std::vector<std::size_t>& input_shape,
                         std::size_t classes);
// {name, input_shape?, layers:[{type, params, searchable?, width_options?,
// kernel_options?, fixed_format?, name?}]}; unknown keys are rejected.
ModelConfig parse_model_config(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& config);

struct QuantPhase {
  bool weight_quant_active = false;
  bool act_quant_active = false;
  std::size_t act_quant_start_step = 0;
};

struct FormatThreshold {
  NumericFormat format;
  double activation = 0.0;
  double weight = 0.0;
};

// Switchable clipping: one (activation, weight) threshold pair per
// (weight layer, format).
struct ThresholdTable {
  std::vector<std::vector<FormatThreshold>> layers;  // indexed by weight-layer index

  const FormatThreshold& lookup(std::size_t layer, const NumericFormat& f) const;
  bool empty() const noexcept { return layers.empty(); }
};

// Activation std multiple per format bitwidth.
struct ClipMultiples {
  double low = 3.0;   // <= 4 bits
  double mid = 3.5;   // 5-6 bits
  double high = 4.0;  // >= 7 bits

  static ClipMultiples uniform(double m) { return {m, m, m}; }
  double for_format(const NumericFormat& f) const noexcept;
};

struct Param {
  std::string name;
  Tensor value;
};

using Gradients = std::vector<Tensor>;  // parallel to Network::params()

class Network;

struct ForwardOptions {
  std::span<const ArchChoice> archs;  // one per searchable weight layer
  QuantPhase phase;
  const ThresholdTable* thresholds = nullptr;
  bool joint_kernels = false;  // run every kernel branch and average
  bool keep_cache = true;
};

struct LayerCache;

struct ForwardResult {
  Tensor logits;
  std::vector<LayerCache> cache;
  ForwardResult();
  ForwardResult(ForwardResult&&) noexcept;
  ForwardResult& operator=(ForwardResult&&) noexcept;
  ~ForwardResult();
};

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

class Network {
 public:
  static Network build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }

  // Weight layers in order, and the subset the controller searches.
  std::size_t weight_layer_count() const noexcept { return weight_layers_.size(); }
  const std::vector<std::size_t>& weight_layers() const noexcept { return weight_layers_; }
  const std::vector<std::size_t>& searchable_layers() const noexcept { return searchable_; }
  const LayerConfig& weight_layer(std::size_t w) const { return config_.layers[weight_layers_[w]]; }

  // Default choice for a weight layer (its fixed format or BF16, full width,
  // base kernel).
  ArchChoice identity_arch(std::size_t weight_layer) const;
  std::vector<ArchChoice> uniform_archs(const NumericFormat& f) const;
  // Cartesian product of formats x widths x kernels for a searchable layer.
  std::vector<ArchChoice> layer_options(std::size_t weight_layer,
                                        std::span<const NumericFormat> formats) const;

  // Per-example MACs for every weight layer with mac_table entries for the
  // searched width/kernel options.
  ModelManifest manifest() const;

  // Indices into params() of the weight branches and bias of a weight layer.
  struct WeightRefs {
    std::vector<std::size_t> branches;  // one per kernel option
    std::vector<int> branch_kernels;
    std::size_t bias = 0;
  };
  const WeightRefs& weight_refs(std::size_t weight_layer) const { return refs_[weight_layer]; }

  ForwardResult forward(const Tensor& input, const ForwardOptions& options) const;
  // Mean softmax cross-entropy and its gradients.
  BackwardResult backward(const ForwardResult& fwd, std::span<const int> labels) const;

  std::size_t classes() const;

 private:
  ModelConfig config_;
  std::vector<Param> params_;
  std::vector<std::size_t> weight_layers_;
  std::vector<std::size_t> searchable_;
  std::vector<WeightRefs> refs_;
  std::vector<std::vector<std::size_t>> shapes_;  // activation shape entering each layer
};

double cross_entropy(const Tensor& logits, std::span<const int> labels);
std::size_t count_correct(const Tensor& logits, std::span<const int> labels);

// Activation thresholds = multiple(format) * std of each weight layer's input
// over the calibration batches (unquantized full-width forward); weight
// thresholds = max |w| over the layer's branches.
ThresholdTable profile_thresholds(const Network& net, std::span<const Tensor> batches,
                                  const ClipMultiples& multiples,
                                  std::span<const NumericFormat> formats);
// Re-reads max |w| into every weight entry.
void refresh_weight_thresholds(const Network& net, ThresholdTable& table);

// Switching magnitude between two architectures: the per-layer RMS of
// Q(w; next) - Q(w; prev) in units of the layer's weight threshold, combined
// as a root mean square over searchable layers so each layer counts equally.
double weight_switch_rms(const Network& net, std::span<const ArchChoice> prev,
                         std::span<const ArchChoice> next, const ThresholdTable& table);

struct SgdParams {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// SGD with momentum on the master weights: v = mu*v + g + wd*w; w -= lr*v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdParams p) : params_(p) {}
  void step(Network& net, const Gradients& grads);
  const SgdParams& params() const noexcept { return params_; }
  void set_lr(double lr) noexcept { params_.lr = lr; }

 private:
  SgdParams params_;
  std::vector<std::vector<double>> velocity_;
};

// Checkpoint: "FLQW", u32 version, u32 count, per tensor {u32 name length,
// name, u32 rank, u32 dims...}, then little-endian float32 payloads.
void save_weights(const Network& net, const std::filesystem::path& path);
void load_weights(Network& net, const std::filesystem::path& path);
// Rounds every master weight to float32, matching what a checkpoint stores.
void round_weights_to_float(Network& net);

}  // namespace fliqs

#endif  // FLIQS_NETWORK_HPP_
