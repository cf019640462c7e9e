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

// Emulated integer and minifloat number formats with a symmetric,
// threshold-clipped fake quantizer.
//
// Integer formats use the symmetric grid {-(2^(k-1)-1) .. 2^(k-1)-1}.
// Minifloat formats ExMy carry one sign bit, support subnormals, have no
// inf/NaN encodings (every exponent code is finite) and use the bias 2^(e-1)
// so that the normal exponent range is symmetric about zero.

#ifndef FLIQS_NUMERICS_HPP_
#define FLIQS_NUMERICS_HPP_

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fliqs {

enum class FormatKind { Int, Float, BF16 };

class NumericFormat {
 public:
  static constexpr int kMinIntBits = 2;
  static constexpr int kMaxIntBits = 32;
  static constexpr int kMinExponentBits = 1;
  static constexpr int kMaxExponentBits = 6;
  static constexpr int kMinMantissaBits = 1;
  static constexpr int kMaxMantissaBits = 7;

  // Validating factories; throw ParamError when out of range.
  static NumericFormat integer(int bits);
  static NumericFormat minifloat(int exponent_bits, int mantissa_bits);
  static NumericFormat bf16() noexcept { return NumericFormat(FormatKind::BF16, 16, 8, 7); }

  FormatKind kind() const noexcept { return kind_; }
  bool is_int() const noexcept { return kind_ == FormatKind::Int; }
  bool is_float() const noexcept { return kind_ == FormatKind::Float; }
  bool is_bf16() const noexcept { return kind_ == FormatKind::BF16; }

  // Integer width (Int only).
  int int_bits() const noexcept { return bits_; }
  int exponent_bits() const noexcept { return exponent_bits_; }
  int mantissa_bits() const noexcept { return mantissa_bits_; }

  friend bool operator==(const NumericFormat&, const NumericFormat&) = default;

 private:
  NumericFormat(FormatKind kind, int bits, int e, int m) noexcept
      : kind_(kind), bits_(bits), exponent_bits_(e), mantissa_bits_(m) {}

  FormatKind kind_;
  int bits_;
  int exponent_bits_;
  int mantissa_bits_;
};

// Parses `INT<k>`, `E<e>M<m>` or `BF16` (case-insensitive).
NumericFormat parse_format(std::string_view spec);
std::string format_name(const NumericFormat& f);

// b(alpha): Int k -> k, ExMy -> 1+x+y, BF16 -> 16.
int total_bitwidth(const NumericFormat& f) noexcept;

// Largest finite magnitude at unit scale: 2^(k-1)-1 for Int, the largest
// normal minifloat for Float. BF16 reports the float32-range max.
double max_finite(const NumericFormat& f) noexcept;

// Sorted raw values encodable in `f` (integers for Int formats). Only
// formats of total bitwidth <= 10 are enumerable.
std::vector<double> representable_values(const NumericFormat& f);

// representable_values scaled so that max_finite maps to `threshold`.
std::vector<double> quantization_grid(const NumericFormat& f, double threshold);

enum class Rounding { HalfToEven };

struct QuantConfig {
  double threshold = 1.0;  // sigma_t, > 0
  Rounding rounding = Rounding::HalfToEven;
};

// Snaps a non-negative unit-scale magnitude onto the format grid,
// saturating at max_finite. Exposed for the kernels.
double snap_magnitude(double magnitude, const NumericFormat& f) noexcept;

// Round-to-nearest-even truncation of a float32 significand to 8 bits.
float round_to_bf16(float x) noexcept;

// Clip to [-sigma_t, sigma_t], scale so sigma_t maps to max_finite(f),
// snap to the nearest representable point (ties to even), rescale.
// BF16 skips clipping and rounds the value to bfloat16.
double quantize(double x, const NumericFormat& f, const QuantConfig& q);
std::vector<double> quantize(std::span<const double> x, const NumericFormat& f,
                             const QuantConfig& q);

// |quantize(x) - x|
double quant_error(double x, const NumericFormat& f, const QuantConfig& q);

// |quantize(x; f2) - quantize(x; f1)|
double switching_error(double x, const NumericFormat& f1, const NumericFormat& f2,
                       const QuantConfig& q);

// Named option sets.
std::vector<NumericFormat> search_space(std::string_view name);

}  // namespace fliqs

#endif  // FLIQS_NUMERICS_HPP_
