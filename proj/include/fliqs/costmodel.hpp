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

// Quadratic bit-operation cost model and the absolute reward.

#ifndef FLIQS_COSTMODEL_HPP_
#define FLIQS_COSTMODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fliqs/arch.hpp"

namespace fliqs {

struct MacEntry {
  double width_mult = 1.0;
  int kernel = 1;
  std::uint64_t macs = 0;
};

struct LayerSpec {
  std::string name;
  std::uint64_t macs = 0;
  bool searchable = true;
  std::optional<NumericFormat> fixed_format;
  std::vector<MacEntry> mac_table;

  // MAC_l(alpha); throws ManifestError for options missing from mac_table.
  std::uint64_t macs_for(const ArchChoice& arch) const;
};

struct ModelManifest {
  std::string model_name;
  std::vector<LayerSpec> layers;

  std::size_t searchable_count() const noexcept;
  // Throws ManifestError when an invariant is broken.
  void validate() const;
};

struct RewardParams {
  double cost_target = 1.0;  // C_T in BOPs
  double gamma = -1.0;
};

// b(alpha)^2 * MAC_l(alpha)
double layer_cost(const ArchChoice& arch, const LayerSpec& layer);

// Per-layer costs in manifest order. `archs` holds one choice per searchable
// layer; non-searchable layers use their fixed format at the identity option.
std::vector<double> layer_costs(std::span<const ArchChoice> archs, const ModelManifest& manifest);
double model_cost(std::span<const ArchChoice> archs, const ModelManifest& manifest);
double uniform_cost(const ModelManifest& manifest, const NumericFormat& f);

// Q + gamma * |cost / C_T - 1|
double reward(double quality, double cost, const RewardParams& p);

// "w<multiplier>_k<kernel>"
std::string mac_table_key(double width_mult, int kernel);

ModelManifest parse_manifest(const std::string& json_text, const std::string& source = "<string>");
ModelManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const ModelManifest& manifest);

}  // namespace fliqs

#endif  // FLIQS_COSTMODEL_HPP_
