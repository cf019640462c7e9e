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

#include "fliqs/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "fliqs/error.hpp"
#include "fliqs/kernels.hpp"
#include "fliqs/rng.hpp"

namespace fliqs {

using nlohmann::json;
namespace kp = kernels::parallel;
using kernels::ConvGeometry;
using kernels::GemmShape;
using kernels::Trans;

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += (i ? "," : "") + std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// configs

namespace {

const char* type_name(LayerType t) {
  switch (t) {
    case LayerType::Dense:
      return "dense";
    case LayerType::Conv:
      return "conv";
    case LayerType::DepthwiseConv:
      return "depthwise";
    case LayerType::Relu:
      return "relu";
    case LayerType::MaxPool:
      return "maxpool";
    case LayerType::AvgPool:
      return "avgpool";
    case LayerType::Flatten:
      break;
  }
  return "flatten";
}

LayerType parse_type(const std::string& s, const std::string& where) {
  for (auto t : {LayerType::Dense, LayerType::Conv, LayerType::DepthwiseConv, LayerType::Relu,
                 LayerType::MaxPool, LayerType::AvgPool, LayerType::Flatten}) {
    if (s == type_name(t)) return t;
  }
  throw SchemaError(where + ".type: unknown layer type '" + s + "'");
}

LayerConfig dense(std::size_t in, std::size_t out) {
  LayerConfig l;
  l.type = LayerType::Dense;
  l.in = in;
  l.out = out;
  return l;
}

LayerConfig conv(std::size_t in, std::size_t out, int k) {
  LayerConfig l;
  l.type = LayerType::Conv;
  l.in = in;
  l.out = out;
  l.kernel = k;
  return l;
}

LayerConfig simple(LayerType t) {
  LayerConfig l;
  l.type = t;
  l.searchable = false;
  return l;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw SchemaError(where + ": unknown key '" + key + "'");
  }
}

std::size_t get_size(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number_integer() || obj[key].get<std::int64_t>() <= 0) {
    throw SchemaError(where + "." + key + ": expected a positive integer");
  }
  return obj[key].get<std::size_t>();
}

std::size_t active_channels(double width_mult, std::size_t channels) {
  const auto n = static_cast<std::size_t>(std::ceil(width_mult * static_cast<double>(channels) - 1e-9));
  return std::clamp<std::size_t>(n, 1, channels);
}

}  // namespace

ModelConfig preset_model(const std::string& name, const std::vector<std::size_t>& input_shape,
                         std::size_t classes) {
  ModelConfig cfg;
  cfg.name = name;
  cfg.input_shape = input_shape;
  const std::size_t flat = Tensor::element_count(input_shape);
  auto mlp = [&](std::size_t depth, std::size_t width) {
    std::size_t in = flat;
    for (std::size_t i = 0; i < depth; ++i) {
      cfg.layers.push_back(dense(in, width));
      cfg.layers.push_back(simple(LayerType::Relu));
      in = width;
    }
    cfg.layers.push_back(dense(in, classes));
  };
  if (name == "mlp-2x64") {
    mlp(2, 64);
  } else if (name == "mlp-3x128") {
    mlp(3, 128);
  } else if (name == "cnn-small") {
    if (input_shape.size() != 3) {
      throw ConfigError("cnn-small needs an image input shape [C, H, W], got " +
                        shape_string(input_shape));
    }
    const std::size_t c = input_shape[0], h = input_shape[1] / 4, w = input_shape[2] / 4;
    cfg.layers = {conv(c, 8, 3),  simple(LayerType::Relu), simple(LayerType::MaxPool),
                  conv(8, 16, 3), simple(LayerType::Relu), simple(LayerType::MaxPool),
                  conv(16, 16, 3), simple(LayerType::Relu),
                  dense(16 * h * w, 64), simple(LayerType::Relu), dense(64, classes)};
  } else {
    throw ConfigError("unknown model preset '" + name + "' (mlp-2x64, mlp-3x128, cnn-small)");
  }
  return cfg;
}

ModelConfig parse_model_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("model config: invalid JSON: ") + e.what());
  }
  const std::string root = "model";
  if (!doc.is_object()) throw SchemaError(root + ": expected an object");
  check_keys(doc, {"name", "input_shape", "layers"}, root);
  ModelConfig cfg;
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw SchemaError(root + ".name: expected a string");
  }
  cfg.name = doc["name"].get<std::string>();
  if (doc.contains("input_shape")) {
    for (const auto& d : doc["input_shape"]) {
      if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) {
        throw SchemaError(root + ".input_shape: expected positive integers");
      }
      cfg.input_shape.push_back(d.get<std::size_t>());
    }
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw SchemaError(root + ".layers: expected a non-empty array");
  }
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const json& jl = doc["layers"][i];
    const std::string where = root + ".layers[" + std::to_string(i) + "]";
    if (!jl.is_object() || !jl.contains("type") || !jl["type"].is_string()) {
      throw SchemaError(where + ": expected an object with a string 'type'");
    }
    check_keys(jl, {"type", "name", "params", "searchable", "width_options", "kernel_options",
                    "fixed_format"},
               where);
    LayerConfig l;
    l.type = parse_type(jl["type"].get<std::string>(), where);
    l.searchable = l.has_weights();
    const json params = jl.value("params", json::object());
    const std::string pw = where + ".params";
    switch (l.type) {
      case LayerType::Dense:
        check_keys(params, {"in", "out"}, pw);
        l.in = get_size(params, "in", pw);
        l.out = get_size(params, "out", pw);
        break;
      case LayerType::Conv:
        check_keys(params, {"in", "out", "kernel", "stride"}, pw);
        l.in = get_size(params, "in", pw);
        l.out = get_size(params, "out", pw);
        l.kernel = static_cast<int>(get_size(params, "kernel", pw));
        l.stride = params.contains("stride") ? get_size(params, "stride", pw) : 1;
        break;
      case LayerType::DepthwiseConv:
        check_keys(params, {"channels", "kernel", "stride"}, pw);
        l.in = l.out = get_size(params, "channels", pw);
        l.kernel = static_cast<int>(get_size(params, "kernel", pw));
        l.stride = params.contains("stride") ? get_size(params, "stride", pw) : 1;
        break;
      case LayerType::MaxPool:
        check_keys(params, {"size"}, pw);
        l.pool = params.contains("size") ? get_size(params, "size", pw) : 2;
        break;
      default:
        check_keys(params, {}, pw);
        break;
    }
    if (jl.contains("name")) l.name = jl["name"].get<std::string>();
    if (jl.contains("searchable")) {
      if (!l.has_weights() && jl["searchable"].get<bool>()) {
        throw SchemaError(where + ".searchable: only weight layers can be searched");
      }
      l.searchable = jl["searchable"].get<bool>();
    }
    if (jl.contains("fixed_format")) l.fixed_format = parse_format(jl["fixed_format"].get<std::string>());
    if (jl.contains("width_options")) {
      l.width_options.clear();
      for (const auto& w : jl["width_options"]) {
        const double v = w.get<double>();
        if (!(v > 0.0 && v <= 1.0)) {
          throw SchemaError(where + ".width_options: multipliers must lie in (0, 1]");
        }
        l.width_options.push_back(v);
      }
      if (l.width_options.empty()) throw SchemaError(where + ".width_options: empty");
    }
    if (jl.contains("kernel_options")) {
      if (l.type != LayerType::Conv && l.type != LayerType::DepthwiseConv) {
        throw SchemaError(where + ".kernel_options: only conv layers have kernels");
      }
      for (const auto& k : jl["kernel_options"]) {
        const int v = k.get<int>();
        if (v <= 0 || v % 2 == 0) throw SchemaError(where + ".kernel_options: kernels must be odd");
        l.kernel_options.push_back(v);
      }
    }
    cfg.layers.push_back(std::move(l));
  }
  return cfg;
}

std::string model_config_to_json(const ModelConfig& config) {
  json doc;
  doc["name"] = config.name;
  doc["input_shape"] = config.input_shape;
  doc["layers"] = json::array();
  for (const auto& l : config.layers) {
    json jl;
    jl["type"] = type_name(l.type);
    if (!l.name.empty()) jl["name"] = l.name;
    json params = json::object();
    switch (l.type) {
      case LayerType::Dense:
        params = {{"in", l.in}, {"out", l.out}};
        break;
      case LayerType::Conv:
        params = {{"in", l.in}, {"out", l.out}, {"kernel", l.kernel}, {"stride", l.stride}};
        break;
      case LayerType::DepthwiseConv:
        params = {{"channels", l.in}, {"kernel", l.kernel}, {"stride", l.stride}};
        break;
      case LayerType::MaxPool:
        params = {{"size", l.pool}};
        break;
      default:
        break;
    }
    jl["params"] = params;
    if (l.has_weights()) {
      jl["searchable"] = l.searchable;
      jl["width_options"] = l.width_options;
      if (l.type != LayerType::Dense && !l.kernel_options.empty()) jl["kernel_options"] = l.kernel_options;
      if (l.fixed_format) jl["fixed_format"] = format_name(*l.fixed_format);
    }
    doc["layers"].push_back(jl);
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// thresholds

const FormatThreshold& ThresholdTable::lookup(std::size_t layer, const NumericFormat& f) const {
  if (layer >= layers.size()) throw ParamError("threshold table has no entry for layer " + std::to_string(layer));
  for (const auto& e : layers[layer]) {
    if (e.format == f) return e;
  }
  throw ParamError("threshold table has no " + format_name(f) + " entry for layer " +
                   std::to_string(layer));
}

double ClipMultiples::for_format(const NumericFormat& f) const noexcept {
  const int bits = total_bitwidth(f);
  if (bits <= 4) return low;
  if (bits <= 6) return mid;
  return high;
}

// ---------------------------------------------------------------------------
// forward cache

struct LayerCache {
  std::vector<std::size_t> in_shape;
  std::vector<std::size_t> out_shape;
  Tensor input;  // as consumed by the layer (after activation quantization)
  std::vector<std::uint8_t> act_pass;
  std::vector<std::size_t> branches;
  std::vector<std::vector<double>> weight_views;
  std::vector<std::vector<std::uint8_t>> weight_pass;
  std::vector<std::vector<double>> columns;
  std::size_t active = 0;
  std::vector<std::uint8_t> relu_mask;
  std::vector<std::size_t> pool_argmax;
};

ForwardResult::ForwardResult() = default;
ForwardResult::ForwardResult(ForwardResult&&) noexcept = default;
ForwardResult& ForwardResult::operator=(ForwardResult&&) noexcept = default;
ForwardResult::~ForwardResult() = default;

// ---------------------------------------------------------------------------
// network

Network Network::build(const ModelConfig& config, std::uint64_t seed) {
  Network net;
  net.config_ = config;
  if (config.layers.empty()) throw ConfigError("model '" + config.name + "' has no layers");
  if (config.input_shape.empty()) throw ConfigError("model '" + config.name + "' has no input_shape");

  std::vector<std::size_t> shape = config.input_shape;
  std::set<std::string> names;
  for (std::size_t i = 0; i < net.config_.layers.size(); ++i) {
    auto& l = net.config_.layers[i];
    if (l.name.empty()) l.name = std::string(type_name(l.type)) + std::to_string(i);
    if (!names.insert(l.name).second) throw ConfigError("duplicate layer name '" + l.name + "'");
    const std::string where = "layer " + std::to_string(i) + " ('" + l.name + "')";
    net.shapes_.push_back(shape);

    switch (l.type) {
      case LayerType::Dense: {
        const std::size_t flat = Tensor::element_count(shape);
        if (flat != l.in) {
          throw ConfigError(where + ": dense expects " + std::to_string(l.in) +
                            " inputs but receives " + shape_string(shape));
        }
        shape = {l.out};
        break;
      }
      case LayerType::Conv:
      case LayerType::DepthwiseConv: {
        if (shape.size() != 3 || shape[0] != l.in) {
          throw ConfigError(where + ": expects [" + std::to_string(l.in) + ",H,W] input, got " +
                            shape_string(shape));
        }
        if (l.kernel % 2 == 0) throw ConfigError(where + ": kernel sizes must be odd");
        const ConvGeometry g{l.in, shape[1], shape[2], static_cast<std::size_t>(l.kernel), l.stride,
                             static_cast<std::size_t>(l.kernel / 2)};
        shape = {l.out, g.out_height(), g.out_width()};
        break;
      }
      case LayerType::Relu:
        break;
      case LayerType::MaxPool:
        if (shape.size() != 3 || shape[1] % l.pool != 0 || shape[2] % l.pool != 0) {
          throw ConfigError(where + ": max-pool window " + std::to_string(l.pool) +
                            " does not tile input " + shape_string(shape));
        }
        shape = {shape[0], shape[1] / l.pool, shape[2] / l.pool};
        break;
      case LayerType::AvgPool:
        if (shape.size() != 3) throw ConfigError(where + ": avgpool expects [C,H,W] input");
        shape = {shape[0]};
        break;
      case LayerType::Flatten:
        shape = {Tensor::element_count(shape)};
        break;
    }

    if (!l.has_weights()) continue;
    if (!l.searchable && !l.fixed_format) l.fixed_format = NumericFormat::bf16();
    if (l.kernel_options.empty()) l.kernel_options = {l.kernel};
    if (std::find(l.kernel_options.begin(), l.kernel_options.end(), l.kernel) == l.kernel_options.end()) {
      l.kernel_options.insert(l.kernel_options.begin(), l.kernel);
    }
    if (std::find(l.width_options.begin(), l.width_options.end(), 1.0) == l.width_options.end()) {
      throw ConfigError(where + ": width_options must include 1.0");
    }
    const std::size_t w_index = net.weight_layers_.size();
    net.weight_layers_.push_back(i);
    if (l.searchable) net.searchable_.push_back(w_index);

    WeightRefs refs;
    for (int k : l.kernel_options) {
      std::vector<std::size_t> wshape;
      double fan_in = 0.0;
      if (l.type == LayerType::Dense) {
        wshape = {l.out, l.in};
        fan_in = static_cast<double>(l.in);
      } else if (l.type == LayerType::Conv) {
        const auto ks = static_cast<std::size_t>(k);
        wshape = {l.out, l.in, ks, ks};
        fan_in = static_cast<double>(l.in * ks * ks);
      } else {
        const auto ks = static_cast<std::size_t>(k);
        wshape = {l.in, ks, ks};
        fan_in = static_cast<double>(ks * ks);
      }
      const std::string pname =
          l.kernel_options.size() > 1 ? l.name + ".w.k" + std::to_string(k) : l.name + ".w";
      Tensor w(wshape);
      Rng rng = make_rng(seed, streams::kInit, net.params_.size());
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      for (auto& v : w.data) v = normal(rng);
      refs.branches.push_back(net.params_.size());
      refs.branch_kernels.push_back(k);
      net.params_.push_back({pname, std::move(w)});
    }
    refs.bias = net.params_.size();
    net.params_.push_back({l.name + ".b", Tensor({l.out})});
    net.refs_.push_back(std::move(refs));
  }
  net.shapes_.push_back(shape);
  if (shape.size() != 1) {
    throw ConfigError("model '" + config.name + "' must end in a flat [classes] output, got " +
                      shape_string(shape));
  }
  return net;
}

std::size_t Network::classes() const { return shapes_.back()[0]; }

ArchChoice Network::identity_arch(std::size_t weight_layer) const {
  const auto& l = this->weight_layer(weight_layer);
  ArchChoice a;
  a.format = l.fixed_format.value_or(NumericFormat::bf16());
  a.width_mult = 1.0;
  if (l.kernel_options.size() > 1) a.kernel = l.kernel;
  return a;
}

std::vector<ArchChoice> Network::uniform_archs(const NumericFormat& f) const {
  std::vector<ArchChoice> out;
  for (std::size_t w : searchable_) {
    ArchChoice a = identity_arch(w);
    a.format = f;
    out.push_back(a);
  }
  return out;
}

std::vector<ArchChoice> Network::layer_options(std::size_t weight_layer,
                                               std::span<const NumericFormat> formats) const {
  const auto& l = this->weight_layer(weight_layer);
  std::vector<ArchChoice> out;
  for (const auto& f : formats) {
    for (double w : l.width_options) {
      for (int k : l.kernel_options) {
        ArchChoice a{f, w, std::nullopt};
        if (l.kernel_options.size() > 1) a.kernel = k;
        out.push_back(a);
      }
    }
  }
  return out;
}

ModelManifest Network::manifest() const {
  ModelManifest m;
  m.model_name = config_.name;
  for (std::size_t w = 0; w < weight_layers_.size(); ++w) {
    const auto& l = weight_layer(w);
    const auto& in_shape = shapes_[weight_layers_[w]];
    const auto& out_shape = shapes_[weight_layers_[w] + 1];
    auto macs_for = [&](double width, int k) -> std::uint64_t {
      const std::size_t outc = active_channels(width, l.out);
      const auto ks = static_cast<std::size_t>(k);
      switch (l.type) {
        case LayerType::Dense:
          return l.in * outc;
        case LayerType::Conv:
          return out_shape[1] * out_shape[2] * outc * in_shape[0] * ks * ks;
        default:
          return out_shape[1] * out_shape[2] * outc * ks * ks;
      }
    };
    LayerSpec spec;
    spec.name = l.name;
    spec.searchable = l.searchable;
    spec.fixed_format = l.fixed_format;
    spec.macs = macs_for(1.0, l.kernel);
    if (l.width_options.size() > 1 || l.kernel_options.size() > 1) {
      for (double width : l.width_options) {
        for (int k : l.kernel_options) spec.mac_table.push_back({width, k, macs_for(width, k)});
      }
    }
    m.layers.push_back(std::move(spec));
  }
  return m;
}

ForwardResult Network::forward(const Tensor& input, const ForwardOptions& opt) const {
  if (input.shape.empty() || input.row_size() != Tensor::element_count(config_.input_shape)) {
    throw ParamError("forward: input " + shape_string(input.shape) + " does not match model input " +
                     shape_string(config_.input_shape));
  }
  if (opt.archs.size() != searchable_.size()) {
    throw ParamError("forward: expected " + std::to_string(searchable_.size()) +
                     " architecture choices, got " + std::to_string(opt.archs.size()));
  }
  if ((opt.phase.act_quant_active || opt.phase.weight_quant_active) && opt.thresholds == nullptr) {
    throw ParamError("forward: quantization is active but no thresholds were profiled");
  }
  const std::size_t n = input.shape[0];
  ForwardResult result;
  if (opt.keep_cache) result.cache.resize(config_.layers.size());

  Tensor x = input;
  x.shape.erase(x.shape.begin() + 1, x.shape.end());
  x.shape.insert(x.shape.end(), config_.input_shape.begin(), config_.input_shape.end());

  std::size_t w_index = 0, s_index = 0;
  for (std::size_t li = 0; li < config_.layers.size(); ++li) {
    const auto& l = config_.layers[li];
    LayerCache local;
    LayerCache& c = opt.keep_cache ? result.cache[li] : local;
    c.in_shape = x.shape;
    std::vector<std::size_t> out_shape{n};
    const auto& per_example = shapes_[li + 1];
    out_shape.insert(out_shape.end(), per_example.begin(), per_example.end());

    if (l.has_weights()) {
      const std::size_t w = w_index++;
      const ArchChoice arch = l.searchable ? opt.archs[s_index++] : identity_arch(w);
      const auto& refs = refs_[w];

      // kernel branches
      std::size_t chosen = 0;
      if (arch.kernel) {
        auto it = std::find(refs.branch_kernels.begin(), refs.branch_kernels.end(), *arch.kernel);
        if (it == refs.branch_kernels.end()) {
          throw ParamError("layer '" + l.name + "' has no kernel branch " + std::to_string(*arch.kernel));
        }
        chosen = static_cast<std::size_t>(it - refs.branch_kernels.begin());
      } else {
        chosen = static_cast<std::size_t>(
            std::find(refs.branch_kernels.begin(), refs.branch_kernels.end(), l.kernel) -
            refs.branch_kernels.begin());
      }
      c.branches.clear();
      if (opt.joint_kernels && refs.branches.size() > 1) {
        for (std::size_t b = 0; b < refs.branches.size(); ++b) c.branches.push_back(b);
      } else {
        c.branches.push_back(chosen);
      }

      const FormatThreshold* thr =
          (opt.phase.act_quant_active || opt.phase.weight_quant_active)
              ? &opt.thresholds->lookup(w, arch.format)
              : nullptr;

      if (opt.phase.act_quant_active) {
        c.act_pass.assign(x.size(), 1);
        kp::fake_quantize(x.data, x.data, arch.format, thr->activation, c.act_pass);
      } else {
        c.act_pass.clear();
      }

      Tensor y(out_shape);
      const double scale = 1.0 / static_cast<double>(c.branches.size());
      c.weight_views.assign(c.branches.size(), {});
      c.weight_pass.assign(c.branches.size(), {});
      c.columns.assign(c.branches.size(), {});
      for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
        const auto& master = params_[refs.branches[c.branches[bi]]].value;
        auto& view = c.weight_views[bi];
        view = master.data;
        if (opt.phase.weight_quant_active) {
          c.weight_pass[bi].assign(view.size(), 1);
          kp::fake_quantize(master.data, view, arch.format, thr->weight, c.weight_pass[bi]);
        }
        const int k = refs.branch_kernels[c.branches[bi]];
        std::vector<double> out(y.size());
        if (l.type == LayerType::Dense) {
          kp::gemm(Trans::No, Trans::Yes, {n, l.out, l.in}, x.data, view, out, false);
        } else {
          const ConvGeometry g{l.in, x.shape[2], x.shape[3], static_cast<std::size_t>(k), l.stride,
                               static_cast<std::size_t>(k / 2)};
          if (l.type == LayerType::Conv) {
            const std::size_t plane = g.out_height() * g.out_width();
            auto& col = c.columns[bi];
            col.assign(g.patch() * n * plane, 0.0);
            kp::im2col(g, n, x.data, col);
            std::vector<double> tmp(l.out * n * plane);
            kp::gemm(Trans::No, Trans::No, {l.out, n * plane, g.patch()}, view, col, tmp, false);
            for (std::size_t oc = 0; oc < l.out; ++oc) {
              for (std::size_t b = 0; b < n; ++b) {
                std::copy_n(tmp.data() + (oc * n + b) * plane, plane,
                            out.data() + (b * l.out + oc) * plane);
              }
            }
          } else {
            kp::depthwise_forward(g, n, x.data, view, out);
          }
        }
        for (std::size_t i = 0; i < out.size(); ++i) y.data[i] += scale * out[i];
      }
      if (!opt.keep_cache || l.type == LayerType::Dense) c.columns.clear();

      const auto& bias = params_[refs.bias].value.data;
      const std::size_t plane = y.row_size() / l.out;
      c.active = active_channels(arch.width_mult, l.out);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = 0; oc < l.out; ++oc) {
          double* dst = y.data.data() + (b * l.out + oc) * plane;
          if (oc >= c.active) {
            std::fill(dst, dst + plane, 0.0);
          } else {
            for (std::size_t p = 0; p < plane; ++p) dst[p] += bias[oc];
          }
        }
      }
      for (double v : y.data) {
        if (!std::isfinite(v)) {
          throw NumericalError("non-finite activation in layer " + std::to_string(li) + " ('" +
                                   l.name + "')",
                               static_cast<int>(li));
        }
      }
      if (opt.keep_cache) c.input = std::move(x);
      x = std::move(y);
    } else if (l.type == LayerType::Relu) {
      if (opt.keep_cache) c.relu_mask.assign(x.size(), 0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const bool on = x.data[i] > 0.0;
        if (!on) x.data[i] = 0.0;
        if (opt.keep_cache) c.relu_mask[i] = on ? 1 : 0;
      }
    } else if (l.type == LayerType::MaxPool) {
      const std::size_t ch = x.shape[1], h = x.shape[2], wd = x.shape[3], p = l.pool;
      const std::size_t oh = h / p, ow = wd / p;
      Tensor y(out_shape);
      if (opt.keep_cache) c.pool_argmax.assign(y.size(), 0);
      for (std::size_t plane = 0; plane < n * ch; ++plane) {
        const double* src = x.data.data() + plane * h * wd;
        for (std::size_t yy = 0; yy < oh; ++yy) {
          for (std::size_t xx = 0; xx < ow; ++xx) {
            std::size_t best = (yy * p) * wd + xx * p;
            for (std::size_t dy = 0; dy < p; ++dy) {
              for (std::size_t dx = 0; dx < p; ++dx) {
                const std::size_t idx = (yy * p + dy) * wd + xx * p + dx;
                if (src[idx] > src[best]) best = idx;
              }
            }
            const std::size_t o = plane * oh * ow + yy * ow + xx;
            y.data[o] = src[best];
            if (opt.keep_cache) c.pool_argmax[o] = plane * h * wd + best;
          }
        }
      }
      x = std::move(y);
    } else if (l.type == LayerType::AvgPool) {
      const std::size_t ch = x.shape[1], plane = x.shape[2] * x.shape[3];
      Tensor y(out_shape);
      for (std::size_t i = 0; i < n * ch; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < plane; ++p) s += x.data[i * plane + p];
        y.data[i] = s / static_cast<double>(plane);
      }
      x = std::move(y);
    } else {
      x.shape = out_shape;
    }
    c.out_shape = out_shape;
  }
  result.logits = std::move(x);
  return result;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.shape[0], k = logits.row_size();
  if (labels.size() != n) throw ParamError("cross_entropy: label count mismatch");
  double loss = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = logits.data.data() + b * k;
    const double top = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - top);
    loss += top + std::log(sum) - row[labels[b]];
  }
  return loss / static_cast<double>(n);
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.shape[0], k = logits.row_size();
  std::size_t correct = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = logits.data.data() + b * k;
    const auto pred = static_cast<int>(std::max_element(row, row + k) - row);
    correct += pred == labels[b] ? 1 : 0;
  }
  return correct;
}

BackwardResult Network::backward(const ForwardResult& fwd, std::span<const int> labels) const {
  if (fwd.cache.size() != config_.layers.size()) {
    throw ParamError("backward: forward pass was run without a cache");
  }
  const Tensor& logits = fwd.logits;
  const std::size_t n = logits.shape[0], k = logits.row_size();
  if (labels.size() != n) throw ParamError("backward: label count mismatch");

  BackwardResult result;
  result.loss = cross_entropy(logits, labels);
  result.grads.reserve(params_.size());
  for (const auto& p : params_) result.grads.emplace_back(p.value.shape);

  // d(mean CE)/d(logits)
  Tensor g(logits.shape);
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = logits.data.data() + b * k;
    const double top = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - top);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(row[j] - top) / sum;
      g.data[b * k + j] = (p - (static_cast<int>(j) == labels[b] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }

  std::size_t w_index = weight_layers_.size();
  for (std::size_t li = config_.layers.size(); li-- > 0;) {
    const auto& l = config_.layers[li];
    const LayerCache& c = fwd.cache[li];
    Tensor dx(c.in_shape);

    if (l.has_weights()) {
      const std::size_t w = --w_index;
      const auto& refs = refs_[w];
      const std::size_t plane = g.row_size() / l.out;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = c.active; oc < l.out; ++oc) {
          std::fill_n(g.data.data() + (b * l.out + oc) * plane, plane, 0.0);
        }
      }
      auto& bias_grad = result.grads[refs.bias].data;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t oc = 0; oc < l.out; ++oc) {
          const double* src = g.data.data() + (b * l.out + oc) * plane;
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += src[p];
          bias_grad[oc] += s;
        }
      }

      const double scale = 1.0 / static_cast<double>(c.branches.size());
      std::vector<double> gs(g.data.size());
      for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = scale * g.data[i];
      const Tensor& x = c.input;

      for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
        const std::size_t pid = refs.branches[c.branches[bi]];
        const auto& view = c.weight_views[bi];
        std::vector<double> dw(view.size());
        std::vector<double> dxb(dx.size());
        const int kk = refs.branch_kernels[c.branches[bi]];
        if (l.type == LayerType::Dense) {
          kp::gemm(Trans::Yes, Trans::No, {l.out, l.in, n}, gs, x.data, dw, false);
          kp::gemm(Trans::No, Trans::No, {n, l.in, l.out}, gs, view, dxb, false);
        } else {
          const ConvGeometry geo{l.in, x.shape[2], x.shape[3], static_cast<std::size_t>(kk), l.stride,
                                 static_cast<std::size_t>(kk / 2)};
          if (l.type == LayerType::Conv) {
            const std::size_t op = geo.out_height() * geo.out_width();
            std::vector<double> gr(l.out * n * op);
            for (std::size_t oc = 0; oc < l.out; ++oc) {
              for (std::size_t b = 0; b < n; ++b) {
                std::copy_n(gs.data() + (b * l.out + oc) * op, op, gr.data() + (oc * n + b) * op);
              }
            }
            kp::gemm(Trans::No, Trans::Yes, {l.out, geo.patch(), n * op}, gr, c.columns[bi], dw, false);
            std::vector<double> dcol(geo.patch() * n * op);
            kp::gemm(Trans::Yes, Trans::No, {geo.patch(), n * op, l.out}, view, gr, dcol, false);
            kp::col2im(geo, n, dcol, dxb);
          } else {
            kp::depthwise_backward(geo, n, x.data, view, gs, dxb, dw);
          }
        }
        if (!c.weight_pass[bi].empty()) {
          for (std::size_t i = 0; i < dw.size(); ++i) dw[i] *= c.weight_pass[bi][i];
        }
        auto& acc = result.grads[pid].data;
        for (std::size_t i = 0; i < dw.size(); ++i) acc[i] += dw[i];
        for (std::size_t i = 0; i < dxb.size(); ++i) dx.data[i] += dxb[i];
      }
      if (!c.act_pass.empty()) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= c.act_pass[i];
      }
    } else if (l.type == LayerType::Relu) {
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = c.relu_mask[i] ? g.data[i] : 0.0;
    } else if (l.type == LayerType::MaxPool) {
      for (std::size_t o = 0; o < g.size(); ++o) dx.data[c.pool_argmax[o]] += g.data[o];
    } else if (l.type == LayerType::AvgPool) {
      const std::size_t plane = c.in_shape[2] * c.in_shape[3];
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t p = 0; p < plane; ++p) dx.data[i * plane + p] = g.data[i] / static_cast<double>(plane);
      }
    } else {
      dx.data = g.data;
    }
    g = std::move(dx);
  }
  return result;
}

// ---------------------------------------------------------------------------
// thresholds

ThresholdTable profile_thresholds(const Network& net, std::span<const Tensor> batches,
                                  const ClipMultiples& multiples,
                                  std::span<const NumericFormat> formats) {
  if (batches.empty()) throw ParamError("profile_thresholds: need at least one calibration batch");
  const std::size_t layers = net.weight_layer_count();
  // Per-batch two-pass moments merged with the pairwise update, so constant
  // activations give exactly zero variance.
  std::vector<double> mean(layers, 0.0), m2(layers, 0.0), count(layers, 0.0);
  std::vector<ArchChoice> archs;
  for (std::size_t w : net.searchable_layers()) archs.push_back(net.identity_arch(w));
  for (const auto& batch : batches) {
    ForwardOptions opt;
    opt.archs = archs;
    auto fwd = net.forward(batch, opt);
    for (std::size_t w = 0; w < layers; ++w) {
      const auto& x = fwd.cache[net.weight_layers()[w]].input.data;
      const auto nb = static_cast<double>(x.size());
      double mb = 0.0;
      for (double v : x) mb += v;
      mb /= nb;
      double m2b = 0.0;
      for (double v : x) m2b += (v - mb) * (v - mb);
      const double n = count[w] + nb;
      const double delta = mb - mean[w];
      m2[w] += m2b + delta * delta * count[w] * nb / n;
      mean[w] += delta * nb / n;
      count[w] = n;
    }
  }
  ThresholdTable table;
  table.layers.resize(layers);
  for (std::size_t w = 0; w < layers; ++w) {
    const double sd = std::sqrt(m2[w] / count[w]);
    if (!(sd > 1e-12)) throw DegenerateThresholdError(net.weight_layer(w).name);
    std::vector<NumericFormat> fmts(formats.begin(), formats.end());
    if (const auto& fixed = net.weight_layer(w).fixed_format) fmts.push_back(*fixed);
    for (const auto& f : fmts) {
      bool seen = false;
      for (const auto& e : table.layers[w]) seen = seen || e.format == f;
      if (!seen) table.layers[w].push_back({f, multiples.for_format(f) * sd, 0.0});
    }
  }
  refresh_weight_thresholds(net, table);
  return table;
}

void refresh_weight_thresholds(const Network& net, ThresholdTable& table) {
  for (std::size_t w = 0; w < net.weight_layer_count() && w < table.layers.size(); ++w) {
    double top = 0.0;
    for (std::size_t pid : net.weight_refs(w).branches) {
      for (double v : net.params()[pid].value.data) top = std::max(top, std::fabs(v));
    }
    if (!(top > 0.0)) top = 1.0;
    for (auto& e : table.layers[w]) e.weight = top;
  }
}

double weight_switch_rms(const Network& net, std::span<const ArchChoice> prev,
                         std::span<const ArchChoice> next, const ThresholdTable& table) {
  const auto& searchable = net.searchable_layers();
  if (prev.size() != searchable.size() || next.size() != searchable.size()) {
    throw ParamError("weight_switch_rms: expected one choice per searchable layer");
  }
  if (searchable.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < searchable.size(); ++s) {
    const std::size_t w = searchable[s];
    if (prev[s].format == next[s].format) continue;
    const auto& refs = net.weight_refs(w);
    std::size_t branch = 0;
    if (next[s].kernel) {
      for (std::size_t b = 0; b < refs.branch_kernels.size(); ++b) {
        if (refs.branch_kernels[b] == *next[s].kernel) branch = b;
      }
    }
    const auto& master = net.params()[refs.branches[branch]].value.data;
    const double ta = table.lookup(w, prev[s].format).weight, tb = table.lookup(w, next[s].format).weight;
    std::vector<double> qa(master.size()), qb(master.size());
    kp::fake_quantize(master, qa, prev[s].format, ta, {});
    kp::fake_quantize(master, qb, next[s].format, tb, {});
    double sq = 0.0;
    for (std::size_t i = 0; i < master.size(); ++i) sq += (qb[i] - qa[i]) * (qb[i] - qa[i]);
    const double scale = std::max(ta, tb);
    if (scale > 0.0 && !master.empty()) total += sq / static_cast<double>(master.size()) / (scale * scale);
  }
  return std::sqrt(total / static_cast<double>(searchable.size()));
}

// ---------------------------------------------------------------------------
// optimizer

void SgdOptimizer::step(Network& net, const Gradients& grads) {
  auto& params = net.params();
  if (grads.size() != params.size()) throw ParamError("sgd step: gradient count mismatch");
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value.data;
    const auto& g = grads[i].data;
    if (g.size() != w.size()) throw ParamError("sgd step: shape mismatch for " + params[i].name);
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = params_.momentum * v[j] + g[j] + params_.weight_decay * w[j];
      w[j] -= params_.lr * v[j];
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[4] = {'F', 'L', 'Q', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated reading " + what, offset);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_weights(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(net.params().size()));
  for (const auto& p : net.params()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (auto d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& p : net.params()) {
    for (double v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

void load_weights(Network& net, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint '" + path.string() + "' lacks the FLQW magic", 0);
  }
  const auto version = get_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto count = get_u32(in, "tensor count");
  auto& params = net.params();
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size()),
                      8);
  }
  for (auto& p : params) {
    const auto offset = static_cast<std::size_t>(in.tellg());
    const auto len = get_u32(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("checkpoint truncated in layer table", offset);
    const auto rank = get_u32(in, "rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get_u32(in, "dimension"));
    if (name != p.name || shape != p.value.shape) {
      throw FormatError("checkpoint tensor '" + name + "' " + shape_string(shape) +
                            " does not match model tensor '" + p.name + "' " + shape_string(p.value.shape),
                        offset);
    }
  }
  for (auto& p : params) {
    for (auto& v : p.value.data) v = std::bit_cast<float>(get_u32(in, "payload"));
  }
}

void round_weights_to_float(Network& net) {
  for (auto& p : net.params()) {
    for (auto& v : p.value.data) v = static_cast<float>(v);
  }
}

}  // namespace fliqs
