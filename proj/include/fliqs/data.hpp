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

// Datasets: IDX files, synthetic generators and deterministic batching.

#ifndef FLIQS_DATA_HPP_
#define FLIQS_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fliqs/tensor.hpp"

namespace fliqs {

struct Dataset {
  Tensor images;            // [N, C, H, W] in [0, 1], or [N, D] for feature data
  std::vector<int> labels;  // [N], each in [0, classes)
  std::size_t classes = 0;
  std::string source;

  std::size_t size() const noexcept { return labels.size(); }
  std::vector<std::size_t> example_shape() const;
};

// Big-endian IDX decoding (images magic 0x803, labels magic 0x801).
Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
// Pixels are stored as round(v * 255); images must be [N, 1, H, W] or [N, H, W].
void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

Dataset synth_blobs(std::size_t classes, std::size_t dims, std::size_t n_per_class, double separation,
                    std::uint64_t seed);

// Rendered 28x28 handwritten-style digits with random affine jitter, stroke
// width and pixel noise. Labels cycle through 0..9.
Dataset synth_digits(std::size_t count, std::uint64_t seed);

// Loads train (and optional test) IDX pairs from `dir` using the MNIST file
// names, or returns an empty dataset when they are absent.
bool find_mnist(const std::filesystem::path& dir, Dataset& train, Dataset& test);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);
Dataset head(const Dataset& ds, std::size_t n);

struct BatchPlan {
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  void validate(std::size_t n) const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seed-permuted split; a pure function of (N, seed, fraction). Both index
// lists are returned sorted.
Split split_indices(std::size_t n, const BatchPlan& plan);

// Training batches for one epoch: seed+epoch keyed shuffle of the training
// split, partial last batch dropped. Throws ConfigError when the batch does
// not fit in the split.
std::vector<std::vector<std::size_t>> train_batches(const Split& split, const BatchPlan& plan,
                                                    std::uint64_t epoch);
// Validation split cut into fixed batches in index order (last one may be short).
std::vector<std::vector<std::size_t>> validation_batches(const Split& split, std::size_t batch_size);

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch gather(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace fliqs

#endif  // FLIQS_DATA_HPP_
