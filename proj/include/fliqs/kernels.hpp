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

// Dense compute kernels used by the network stack.
//
// `serial` holds the straightforward reference loops; `parallel` holds the
// OpenMP versions the trainer runs. Each output element of a parallel kernel
// is produced by exactly one thread with the same summation order as the
// reference, so results do not depend on the thread count.

#ifndef FLIQS_KERNELS_HPP_
#define FLIQS_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

#include "fliqs/numerics.hpp"

namespace fliqs::kernels {

enum class Trans { No, Yes };

// C[M,N] (+)= op(A)[M,K] * op(B)[K,N], all row-major and contiguous.
// op(A) = A when ta == No (A is M x K), A^T when ta == Yes (A is K x M).
struct GemmShape {
  std::size_t m, n, k;
};

// Geometry of a square-kernel 2D convolution over one image.
struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel, stride, pad;
  std::size_t out_height() const noexcept { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const noexcept { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const noexcept { return channels * kernel * kernel; }
};

namespace serial {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

// Unfolds a batch [N, C, H, W] into columns [C*k*k, N*OH*OW].
void im2col(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
            std::span<double> columns);
// Adjoint of im2col: scatters-adds columns back into [N, C, H, W].
void col2im(const ConvGeometry& g, std::size_t batch, std::span<const double> columns,
            std::span<double> input_grad);

// Depthwise conv, weights [C, k, k].
void depthwise_forward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                       std::span<const double> weights, std::span<double> output);
void depthwise_backward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                        std::span<const double> weights, std::span<const double> output_grad,
                        std::span<double> input_grad, std::span<double> weight_grad);

// Fake-quantizes `in` into `out`. When `pass` is non-empty it receives the
// clipped straight-through mask (1 inside the threshold, 0 outside).
void fake_quantize(std::span<const double> in, std::span<double> out, const NumericFormat& f,
                   double threshold, std::span<std::uint8_t> pass);

}  // namespace serial

namespace parallel {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);
void im2col(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
            std::span<double> columns);
void col2im(const ConvGeometry& g, std::size_t batch, std::span<const double> columns,
            std::span<double> input_grad);
void depthwise_forward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                       std::span<const double> weights, std::span<double> output);
void depthwise_backward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                        std::span<const double> weights, std::span<const double> output_grad,
                        std::span<double> input_grad, std::span<double> weight_grad);
void fake_quantize(std::span<const double> in, std::span<double> out, const NumericFormat& f,
                   double threshold, std::span<std::uint8_t> pass);

}  // namespace parallel

}  // namespace fliqs::kernels

#endif  // FLIQS_KERNELS_HPP_
