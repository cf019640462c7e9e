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

#ifndef FLIQS_RNG_HPP_
#define FLIQS_RNG_HPP_

#include <cstdint>
#include <random>

namespace fliqs {

using Rng = std::mt19937_64;

// splitmix64 finalizer; mixes a stream id and index into a base seed so that
// every (seed, stream, index) triple gets an independent generator.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1) + 0xBF58476D1CE4E5B9ULL * index;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(mix_seed(seed, stream, index));
}

// Uniform in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Stream ids, one per consumer.
namespace streams {
inline constexpr std::uint64_t kController = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kSynthData = 5;
inline constexpr std::uint64_t kAnalysis = 6;
inline constexpr std::uint64_t kKernelBranch = 7;
}  // namespace streams

}  // namespace fliqs

#endif  // FLIQS_RNG_HPP_
