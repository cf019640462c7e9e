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

#include "fliqs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fliqs/error.hpp"

namespace fliqs::kernels {

namespace {

inline double op_a(Trans t, std::span<const double> a, GemmShape s, std::size_t i, std::size_t k) {
  return t == Trans::No ? a[i * s.k + k] : a[k * s.m + i];
}

inline double op_b(Trans t, std::span<const double> b, GemmShape s, std::size_t k, std::size_t j) {
  return t == Trans::No ? b[k * s.n + j] : b[j * s.k + k];
}

inline bool in_bounds(std::ptrdiff_t v, std::size_t limit) {
  return v >= 0 && static_cast<std::size_t>(v) < limit;
}

// Row-major transpose of a rows x cols matrix.
std::vector<double> transposed(std::span<const double> src, std::size_t rows, std::size_t cols) {
  std::vector<double> dst(rows * cols);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) dst[c * rows + r] = src[r * cols + c];
  }
  return dst;
}

void check_quant_args(std::span<const double> in, std::span<double> out,
                      std::span<std::uint8_t> pass) {
  if (out.size() != in.size() || (!pass.empty() && pass.size() != in.size())) {
    throw ParamError("fake_quantize: buffer sizes differ");
  }
}

inline double fake_quantize_one(double x, const NumericFormat& f, const QuantConfig& q,
                                 std::uint8_t* pass) {
  if (pass != nullptr) *pass = f.is_bf16() || std::fabs(x) <= q.threshold ? 1 : 0;
  return quantize(x, f, q);
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference

namespace serial {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double sum = accumulate ? c[i * s.n + j] : 0.0;
      for (std::size_t k = 0; k < s.k; ++k) sum += op_a(ta, a, s, i, k) * op_b(tb, b, s, k, j);
      c[i * s.n + j] = sum;
    }
  }
}

void im2col(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
            std::span<double> columns) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t ncols = batch * oh * ow;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              double v = 0.0;
              if (in_bounds(iy, g.height) && in_bounds(ix, g.width)) {
                v = input[((n * g.channels + c) * g.height + iy) * g.width + ix];
              }
              columns[row * ncols + (n * oh + y) * ow + x] = v;
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::size_t batch, std::span<const double> columns,
            std::span<double> input_grad) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t ncols = batch * oh * ow;
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (in_bounds(iy, g.height) && in_bounds(ix, g.width)) {
                input_grad[((n * g.channels + c) * g.height + iy) * g.width + ix] +=
                    columns[row * ncols + (n * oh + y) * ow + x];
              }
            }
          }
        }
      }
    }
  }
}

void depthwise_forward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                       std::span<const double> weights, std::span<double> output) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double sum = 0.0;
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (in_bounds(iy, g.height) && in_bounds(ix, g.width)) {
                sum += weights[(c * g.kernel + ky) * g.kernel + kx] *
                       input[((n * g.channels + c) * g.height + iy) * g.width + ix];
              }
            }
          }
          output[((n * g.channels + c) * oh + y) * ow + x] = sum;
        }
      }
    }
  }
}

void depthwise_backward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                        std::span<const double> weights, std::span<const double> output_grad,
                        std::span<double> input_grad, std::span<double> weight_grad) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
  std::fill(weight_grad.begin(), weight_grad.end(), 0.0);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double go = output_grad[((n * g.channels + c) * oh + y) * ow + x];
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                              static_cast<std::ptrdiff_t>(g.pad);
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (in_bounds(iy, g.height) && in_bounds(ix, g.width)) {
                const std::size_t in_idx = ((n * g.channels + c) * g.height + iy) * g.width + ix;
                const std::size_t w_idx = (c * g.kernel + ky) * g.kernel + kx;
                weight_grad[w_idx] += go * input[in_idx];
                input_grad[in_idx] += go * weights[w_idx];
              }
            }
          }
        }
      }
    }
  }
}

void fake_quantize(std::span<const double> in, std::span<double> out, const NumericFormat& f,
                   double threshold, std::span<std::uint8_t> pass) {
  check_quant_args(in, out, pass);
  const QuantConfig q{threshold, Rounding::HalfToEven};
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = fake_quantize_one(in[i], f, q, pass.empty() ? nullptr : &pass[i]);
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP

namespace parallel {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  // Pack transposed operands so the inner loop streams contiguous rows of B.
  std::vector<double> a_packed, b_packed;
  std::span<const double> am = a, bm = b;
  if (ta == Trans::Yes) {
    a_packed = transposed(a, s.k, s.m);
    am = a_packed;
  }
  if (tb == Trans::Yes) {
    b_packed = transposed(b, s.n, s.k);
    bm = b_packed;
  }
  const double* ap = am.data();
  const double* bp = bm.data();
  double* cp = c.data();
  // Tiles of kRows x kCols outputs; each output still accumulates over k in
  // ascending order, matching the reference bit for bit.
  constexpr std::size_t kRows = 4, kCols = 256;
  const std::size_t row_tiles = (s.m + kRows - 1) / kRows;
  const std::size_t col_tiles = (s.n + kCols - 1) / kCols;
  const auto tiles = static_cast<std::int64_t>(row_tiles * col_tiles);
#pragma omp parallel for schedule(static)
  for (std::int64_t tile = 0; tile < tiles; ++tile) {
    const std::size_t i0 = static_cast<std::size_t>(tile) / col_tiles * kRows;
    const std::size_t j0 = static_cast<std::size_t>(tile) % col_tiles * kCols;
    const std::size_t i1 = std::min(s.m, i0 + kRows), j1 = std::min(s.n, j0 + kCols);
    const std::size_t width = j1 - j0;
    if (!accumulate) {
      for (std::size_t i = i0; i < i1; ++i) std::fill(cp + i * s.n + j0, cp + i * s.n + j1, 0.0);
    }
    for (std::size_t k = 0; k < s.k; ++k) {
      const double* brow = bp + k * s.n + j0;
      for (std::size_t i = i0; i < i1; ++i) {
        const double aik = ap[i * s.k + k];
        double* crow = cp + i * s.n + j0;
#pragma omp simd
        for (std::size_t j = 0; j < width; ++j) crow[j] += aik * brow[j];
      }
    }
  }
}

void im2col(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
            std::span<double> columns) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t ncols = batch * oh * ow;
  const std::size_t rows = g.patch();
#pragma omp parallel for schedule(static)
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t kx = row % g.kernel;
    const std::size_t ky = (row / g.kernel) % g.kernel;
    const std::size_t c = row / (g.kernel * g.kernel);
    double* dst = columns.data() + row * ncols;
    for (std::size_t n = 0; n < batch; ++n) {
      const double* plane = input.data() + (n * g.channels + c) * g.height * g.width;
      for (std::size_t y = 0; y < oh; ++y) {
        const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                        static_cast<std::ptrdiff_t>(g.pad);
        double* out = dst + (n * oh + y) * ow;
        if (!in_bounds(iy, g.height)) {
          std::fill(out, out + ow, 0.0);
          continue;
        }
        for (std::size_t x = 0; x < ow; ++x) {
          const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                          static_cast<std::ptrdiff_t>(g.pad);
          out[x] = in_bounds(ix, g.width) ? plane[iy * g.width + ix] : 0.0;
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::size_t batch, std::span<const double> columns,
            std::span<double> input_grad) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t ncols = batch * oh * ow;
  // One thread per (image, channel) plane; kernel offsets accumulate in the
  // same (ky, kx, y, x) order as the reference.
#pragma omp parallel for schedule(static)
  for (std::size_t plane_idx = 0; plane_idx < batch * g.channels; ++plane_idx) {
    const std::size_t n = plane_idx / g.channels;
    const std::size_t c = plane_idx % g.channels;
    double* plane = input_grad.data() + plane_idx * g.height * g.width;
    std::fill(plane, plane + g.height * g.width, 0.0);
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        const double* src = columns.data() + row * ncols + n * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (!in_bounds(iy, g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (in_bounds(ix, g.width)) plane[iy * g.width + ix] += src[y * ow + x];
          }
        }
      }
    }
  }
}

void depthwise_forward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                       std::span<const double> weights, std::span<double> output) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
#pragma omp parallel for schedule(static)
  for (std::size_t plane_idx = 0; plane_idx < batch * g.channels; ++plane_idx) {
    const std::size_t c = plane_idx % g.channels;
    const double* in = input.data() + plane_idx * g.height * g.width;
    const double* w = weights.data() + c * g.kernel * g.kernel;
    double* out = output.data() + plane_idx * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (!in_bounds(iy, g.height)) continue;
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (in_bounds(ix, g.width)) sum += w[ky * g.kernel + kx] * in[iy * g.width + ix];
          }
        }
        out[y * ow + x] = sum;
      }
    }
  }
}

void depthwise_backward(const ConvGeometry& g, std::size_t batch, std::span<const double> input,
                        std::span<const double> weights, std::span<const double> output_grad,
                        std::span<double> input_grad, std::span<double> weight_grad) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t kk = g.kernel * g.kernel;
  // Channels are independent; within a channel images run in order so the
  // weight-gradient reduction order matches the reference.
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* wg = weight_grad.data() + c * kk;
    std::fill(wg, wg + kk, 0.0);
    const double* w = weights.data() + c * kk;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t plane_idx = n * g.channels + c;
      const double* in = input.data() + plane_idx * g.height * g.width;
      double* ig = input_grad.data() + plane_idx * g.height * g.width;
      std::fill(ig, ig + g.height * g.width, 0.0);
      const double* og = output_grad.data() + plane_idx * oh * ow;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double go = og[y * ow + x];
          for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (!in_bounds(iy, g.height)) continue;
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                              static_cast<std::ptrdiff_t>(g.pad);
              if (!in_bounds(ix, g.width)) continue;
              wg[ky * g.kernel + kx] += go * in[iy * g.width + ix];
              ig[iy * g.width + ix] += go * w[ky * g.kernel + kx];
            }
          }
        }
      }
    }
  }
}

void fake_quantize(std::span<const double> in, std::span<double> out, const NumericFormat& f,
                   double threshold, std::span<std::uint8_t> pass) {
  check_quant_args(in, out, pass);
  const QuantConfig q{threshold, Rounding::HalfToEven};
  if (!f.is_bf16() && !(threshold > 0.0)) {
    throw ParamError("fake_quantize: clipping threshold must be positive");
  }
  bool bad_input = false;
  std::uint8_t* mask = pass.empty() ? nullptr : pass.data();
#pragma omp parallel for schedule(static) reduction(|| : bad_input)
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!std::isfinite(in[i])) {
      bad_input = true;
      continue;
    }
    out[i] = fake_quantize_one(in[i], f, q, mask == nullptr ? nullptr : mask + i);
  }
  if (bad_input) throw DomainError("fake_quantize: non-finite input");
}

}  // namespace parallel

}  // namespace fliqs::kernels
