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

#include "fliqs/arch.hpp"

#include <charconv>

namespace fliqs {

std::string arch_label(const ArchChoice& a) {
  std::string label = format_name(a.format);
  if (a.width_mult != 1.0 || a.kernel) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), a.width_mult);
    label += "/w" + std::string(buf, ptr);
  }
  if (a.kernel) label += "/k" + std::to_string(*a.kernel);
  return label;
}

}  // namespace fliqs
