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

#ifndef FLIQS_ARCH_HPP_
#define FLIQS_ARCH_HPP_

#include <optional>
#include <string>

#include "fliqs/numerics.hpp"

namespace fliqs {

// One layer's sampled decision: numeric format, channel-width multiplier and
// (for kernel-searched convolutions) the kernel size. An empty kernel means
// the layer's base kernel.
struct ArchChoice {
  NumericFormat format = NumericFormat::bf16();
  double width_mult = 1.0;
  std::optional<int> kernel;

  friend bool operator==(const ArchChoice&, const ArchChoice&) = default;
};

// "INT4", "INT4/w0.5", "E4M3/w1/k5"
std::string arch_label(const ArchChoice& a);

}  // namespace fliqs

#endif  // FLIQS_ARCH_HPP_
