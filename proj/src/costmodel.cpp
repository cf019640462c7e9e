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

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fliqs/error.hpp"

namespace fliqs {

using nlohmann::json;

namespace {

bool same_width(double a, double b) noexcept { return std::fabs(a - b) < 1e-9; }

std::pair<double, int> parse_mac_key(const std::string& key, const std::string& where) {
  const auto sep = key.find("_k");
  if (key.size() < 4 || key[0] != 'w' || sep == std::string::npos) {
    throw SchemaError(where + ": mac_table key '" + key + "' is not of the form w<mult>_k<kernel>");
  }
  double width = 0.0;
  int kernel = 0;
  const char* wb = key.data() + 1;
  const char* we = key.data() + sep;
  auto [wp, wec] = std::from_chars(wb, we, width);
  const char* kb = key.data() + sep + 2;
  const char* ke = key.data() + key.size();
  auto [kp, kec] = std::from_chars(kb, ke, kernel);
  if (wec != std::errc() || wp != we || kec != std::errc() || kp != ke || width <= 0.0 ||
      kernel <= 0) {
    throw SchemaError(where + ": mac_table key '" + key + "' is not of the form w<mult>_k<kernel>");
  }
  return {width, kernel};
}

std::uint64_t read_macs(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d < 0.0 || std::floor(d) != d) {
      throw SchemaError(where + ": MAC count must be a non-negative integer");
    }
    return static_cast<std::uint64_t>(d);
  }
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
    throw SchemaError(where + ": MAC count must be non-negative");
  }
  return v.get<std::uint64_t>();
}

const std::set<std::string> kLayerKeys = {"name", "macs", "searchable", "fixed_format",
                                          "mac_table"};

}  // namespace

std::uint64_t LayerSpec::macs_for(const ArchChoice& arch) const {
  if (mac_table.empty()) {
    if (!same_width(arch.width_mult, 1.0) || arch.kernel) {
      throw ManifestError("layer '" + name + "' has no mac_table but option " + arch_label(arch) +
                          " requests a width/kernel change");
    }
    return macs;
  }
  int kernel = 0;
  if (arch.kernel) {
    kernel = *arch.kernel;
  } else {
    for (const auto& e : mac_table) {
      if (same_width(e.width_mult, 1.0) && e.macs == macs) kernel = e.kernel;
    }
  }
  for (const auto& e : mac_table) {
    if (same_width(e.width_mult, arch.width_mult) && e.kernel == kernel) return e.macs;
  }
  throw ManifestError("layer '" + name + "': option " +
                      mac_table_key(arch.width_mult, kernel) + " is absent from mac_table");
}

std::size_t ModelManifest::searchable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.searchable ? 1 : 0;
  return n;
}

void ModelManifest::validate() const {
  if (layers.empty()) throw ManifestError("manifest '" + model_name + "' has no layers");
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (!names.insert(l.name).second) {
      throw ManifestError("manifest '" + model_name + "': duplicate layer name '" + l.name + "'");
    }
    if (!l.searchable && !l.fixed_format) {
      throw ManifestError("layer '" + l.name + "' is not searchable and declares no fixed_format");
    }
    if (!l.mac_table.empty()) {
      bool has_identity = false;
      for (const auto& e : l.mac_table) {
        has_identity = has_identity || (same_width(e.width_mult, 1.0) && e.macs == l.macs);
      }
      if (!has_identity) {
        throw ManifestError("layer '" + l.name +
                            "': mac_table lacks the identity option (w1 with the base MACs)");
      }
    }
  }
}

double layer_cost(const ArchChoice& arch, const LayerSpec& layer) {
  const double bits = total_bitwidth(arch.format);
  return bits * bits * static_cast<double>(layer.macs_for(arch));
}

std::vector<double> layer_costs(std::span<const ArchChoice> archs, const ModelManifest& manifest) {
  if (archs.size() != manifest.searchable_count()) {
    throw ManifestError("expected " + std::to_string(manifest.searchable_count()) +
                        " architecture choices for '" + manifest.model_name + "', got " +
                        std::to_string(archs.size()));
  }
  std::vector<double> costs;
  costs.reserve(manifest.layers.size());
  std::size_t next = 0;
  for (const auto& layer : manifest.layers) {
    if (layer.searchable) {
      costs.push_back(layer_cost(archs[next++], layer));
    } else {
      costs.push_back(layer_cost(ArchChoice{*layer.fixed_format, 1.0, std::nullopt}, layer));
    }
  }
  return costs;
}

double model_cost(std::span<const ArchChoice> archs, const ModelManifest& manifest) {
  double total = 0.0;
  for (double c : layer_costs(archs, manifest)) total += c;
  return total;
}

double uniform_cost(const ModelManifest& manifest, const NumericFormat& f) {
  std::vector<ArchChoice> archs(manifest.searchable_count(), ArchChoice{f, 1.0, std::nullopt});
  return model_cost(archs, manifest);
}

double reward(double quality, double cost, const RewardParams& p) {
  if (!(p.cost_target > 0.0)) throw ParamError("reward: cost target must be positive");
  if (cost < 0.0) throw ParamError("reward: cost must be non-negative");
  return quality + p.gamma * std::fabs(cost / p.cost_target - 1.0);
}

std::string mac_table_key(double width_mult, int kernel) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), width_mult);
  return "w" + std::string(buf, ptr) + "_k" + std::to_string(kernel);
}

ModelManifest parse_manifest(const std::string& json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(source + ": invalid JSON at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  if (!doc.is_object()) throw SchemaError(source + ": manifest must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "model_name" && key != "layers") {
      throw SchemaError(source + ": unknown key '" + key + "'");
    }
  }
  if (!doc.contains("model_name") || !doc["model_name"].is_string()) {
    throw SchemaError(source + ": missing string field 'model_name'");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    throw SchemaError(source + ": missing array field 'layers'");
  }
  ModelManifest m;
  m.model_name = doc["model_name"].get<std::string>();
  if (doc["layers"].empty()) throw SchemaError(source + ": 'layers' is empty");

  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const json& jl = doc["layers"][i];
    const std::string where = source + ": layers[" + std::to_string(i) + "]";
    if (!jl.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& [key, _] : jl.items()) {
      if (!kLayerKeys.contains(key)) throw SchemaError(where + ": unknown key '" + key + "'");
    }
    if (!jl.contains("name") || !jl["name"].is_string()) {
      throw SchemaError(where + ": missing string field 'name'");
    }
    if (!jl.contains("macs")) throw SchemaError(where + ".macs: missing field");
    LayerSpec l;
    l.name = jl["name"].get<std::string>();
    if (!names.insert(l.name).second) {
      throw SchemaError(where + ".name: duplicate layer name '" + l.name + "'");
    }
    l.macs = read_macs(jl["macs"], where + ".macs");
    if (jl.contains("searchable")) {
      if (!jl["searchable"].is_boolean()) throw SchemaError(where + ".searchable: expected bool");
      l.searchable = jl["searchable"].get<bool>();
    }
    if (jl.contains("fixed_format")) {
      if (!jl["fixed_format"].is_string()) {
        throw SchemaError(where + ".fixed_format: expected a format string");
      }
      l.fixed_format = parse_format(jl["fixed_format"].get<std::string>());
    }
    if (jl.contains("mac_table")) {
      if (!jl["mac_table"].is_object()) throw SchemaError(where + ".mac_table: expected an object");
      for (const auto& [key, value] : jl["mac_table"].items()) {
        auto [width, kernel] = parse_mac_key(key, where + ".mac_table");
        l.mac_table.push_back({width, kernel, read_macs(value, where + ".mac_table." + key)});
      }
    }
    m.layers.push_back(std::move(l));
  }
  try {
    m.validate();
  } catch (const ManifestError& e) {
    throw SchemaError(source + ": " + e.what());
  }
  return m;
}

ModelManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open manifest '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.string());
}

std::string manifest_to_json(const ModelManifest& manifest) {
  json doc;
  doc["model_name"] = manifest.model_name;
  doc["layers"] = json::array();
  for (const auto& l : manifest.layers) {
    json jl;
    jl["name"] = l.name;
    jl["macs"] = l.macs;
    jl["searchable"] = l.searchable;
    if (l.fixed_format) jl["fixed_format"] = format_name(*l.fixed_format);
    if (!l.mac_table.empty()) {
      json table = json::object();
      for (const auto& e : l.mac_table) table[mac_table_key(e.width_mult, e.kernel)] = e.macs;
      jl["mac_table"] = table;
    }
    doc["layers"].push_back(jl);
  }
  return doc.dump(2);
}

}  // namespace fliqs
