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

#include "fliqs/numerics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "fliqs/error.hpp"

namespace fliqs {

namespace {

int exponent_bias(const NumericFormat& f) noexcept { return 1 << (f.exponent_bits() - 1); }

int parse_count(std::string_view digits, std::string_view token) {
  int value = 0;
  const auto* first = digits.data();
  const auto* last = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (digits.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(std::string(token), "expected a bit count, got '" + std::string(digits) + "'");
  }
  return value;
}

constexpr double kBf16Max = 3.3895313892515355e38;  // (2 - 2^-7) * 2^127

}  // namespace

NumericFormat NumericFormat::integer(int bits) {
  if (bits < kMinIntBits || bits > kMaxIntBits) {
    throw ParamError("integer bitwidth " + std::to_string(bits) + " outside [" +
                     std::to_string(kMinIntBits) + ", " + std::to_string(kMaxIntBits) + "]");
  }
  return NumericFormat(FormatKind::Int, bits, 0, 0);
}

NumericFormat NumericFormat::minifloat(int exponent_bits, int mantissa_bits) {
  if (exponent_bits < kMinExponentBits || exponent_bits > kMaxExponentBits) {
    throw ParamError("exponent bits " + std::to_string(exponent_bits) + " outside [1, 6]");
  }
  if (mantissa_bits < kMinMantissaBits || mantissa_bits > kMaxMantissaBits) {
    throw ParamError("mantissa bits " + std::to_string(mantissa_bits) + " outside [1, 7]");
  }
  return NumericFormat(FormatKind::Float, 1 + exponent_bits + mantissa_bits, exponent_bits,
                       mantissa_bits);
}

NumericFormat parse_format(std::string_view spec) {
  std::string upper(spec);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  std::string_view s(upper);
  const std::string token(spec);

  if (s == "BF16") return NumericFormat::bf16();
  if (s.starts_with("INT")) {
    const int k = parse_count(s.substr(3), token);
    if (k < NumericFormat::kMinIntBits || k > NumericFormat::kMaxIntBits) {
      throw ParseError(token, "integer bitwidth must be in [2, 32]");
    }
    return NumericFormat::integer(k);
  }
  if (s.starts_with("E")) {
    const auto m_pos = s.find('M');
    if (m_pos == std::string_view::npos) throw ParseError(token, "expected E<e>M<m>");
    const int e = parse_count(s.substr(1, m_pos - 1), token);
    const int m = parse_count(s.substr(m_pos + 1), token);
    if (e < NumericFormat::kMinExponentBits || e > NumericFormat::kMaxExponentBits) {
      throw ParseError(token, "exponent bits must be in [1, 6]");
    }
    if (m < NumericFormat::kMinMantissaBits || m > NumericFormat::kMaxMantissaBits) {
      throw ParseError(token, "mantissa bits must be in [1, 7]");
    }
    return NumericFormat::minifloat(e, m);
  }
  throw ParseError(token, "expected INT<k>, E<e>M<m> or BF16");
}

std::string format_name(const NumericFormat& f) {
  switch (f.kind()) {
    case FormatKind::Int:
      return "INT" + std::to_string(f.int_bits());
    case FormatKind::Float:
      return "E" + std::to_string(f.exponent_bits()) + "M" + std::to_string(f.mantissa_bits());
    case FormatKind::BF16:
      break;
  }
  return "BF16";
}

int total_bitwidth(const NumericFormat& f) noexcept {
  switch (f.kind()) {
    case FormatKind::Int:
      return f.int_bits();
    case FormatKind::Float:
      return 1 + f.exponent_bits() + f.mantissa_bits();
    case FormatKind::BF16:
      break;
  }
  return 16;
}

double max_finite(const NumericFormat& f) noexcept {
  switch (f.kind()) {
    case FormatKind::Int:
      return std::ldexp(1.0, f.int_bits() - 1) - 1.0;
    case FormatKind::Float: {
      const int top_exponent = (1 << f.exponent_bits()) - 1 - exponent_bias(f);
      return std::ldexp(2.0 - std::ldexp(1.0, -f.mantissa_bits()), top_exponent);
    }
    case FormatKind::BF16:
      break;
  }
  return kBf16Max;
}

std::vector<double> representable_values(const NumericFormat& f) {
  if (f.is_bf16() || total_bitwidth(f) > 10) {
    throw UnsupportedError("cannot enumerate " + format_name(f) +
                           ": only Int/Float formats up to 10 bits are enumerable");
  }
  std::vector<double> values;
  if (f.is_int()) {
    const int top = (1 << (f.int_bits() - 1)) - 1;
    for (int v = -top; v <= top; ++v) values.push_back(v);
    return values;
  }
  const int bias = exponent_bias(f);
  const int m = f.mantissa_bits();
  for (int code = 0; code < (1 << f.exponent_bits()); ++code) {
    for (int frac = 0; frac < (1 << m); ++frac) {
      const double v = code == 0 ? std::ldexp(frac, 1 - bias - m)
                                 : std::ldexp((1 << m) + frac, code - bias - m);
      values.push_back(v);
      values.push_back(-v);
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

std::vector<double> quantization_grid(const NumericFormat& f, double threshold) {
  auto values = representable_values(f);
  const double top = max_finite(f);
  for (auto& v : values) v = threshold * (v / top);
  return values;
}

double snap_magnitude(double magnitude, const NumericFormat& f) noexcept {
  const double top = max_finite(f);
  if (magnitude >= top) return top;
  if (f.is_int()) return std::nearbyint(magnitude);

  int quantum_exp = 0;
  if (f.is_float()) {
    const int min_normal_exp = 1 - exponent_bias(f);
    int binade = 0;
    std::frexp(magnitude, &binade);
    quantum_exp = std::max(binade - 1, min_normal_exp) - f.mantissa_bits();
  } else {
    int binade = 0;
    std::frexp(magnitude, &binade);
    quantum_exp = std::max(binade - 1, -126) - 7;
  }
  const double snapped =
      std::ldexp(std::nearbyint(std::ldexp(magnitude, -quantum_exp)), quantum_exp);
  return std::min(snapped, top);
}

float round_to_bf16(float x) noexcept {
  if (!std::isfinite(x)) return x;
  return static_cast<float>(std::copysign(snap_magnitude(std::fabs(x), NumericFormat::bf16()), x));
}

double quantize(double x, const NumericFormat& f, const QuantConfig& q) {
  if (!std::isfinite(x)) throw DomainError("quantize: non-finite input");
  if (f.is_bf16()) return std::copysign(snap_magnitude(std::fabs(x), f), x);
  if (!(q.threshold > 0.0) || !std::isfinite(q.threshold)) {
    throw ParamError("quantize: clipping threshold must be positive and finite");
  }
  const double top = max_finite(f);
  const double unit = std::clamp(x, -q.threshold, q.threshold) / q.threshold;
  const double snapped = snap_magnitude(std::fabs(unit) * top, f);
  return std::copysign(q.threshold * (snapped / top), x);
}

std::vector<double> quantize(std::span<const double> x, const NumericFormat& f,
                             const QuantConfig& q) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return quantize(v, f, q); });
  return out;
}

double quant_error(double x, const NumericFormat& f, const QuantConfig& q) {
  return std::fabs(quantize(x, f, q) - x);
}

double switching_error(double x, const NumericFormat& f1, const NumericFormat& f2,
                       const QuantConfig& q) {
  return std::fabs(quantize(x, f2, q) - quantize(x, f1, q));
}

std::vector<NumericFormat> search_space(std::string_view name) {
  std::vector<std::string_view> names;
  if (name == "FLIQS-S-int") {
    names = {"INT4", "INT8", "BF16"};
  } else if (name == "FLIQS-L-int") {
    names = {"INT4", "INT5", "INT6", "INT7", "INT8", "BF16"};
  } else if (name == "FLIQS-S-fp") {
    names = {"E2M1", "E4M3", "BF16"};
  } else if (name == "FLIQS-L-fp") {
    names = {"E2M1", "E2M2", "E2M3", "E2M4", "E2M5", "E3M1", "E3M2", "E3M3",
             "E3M4", "E4M1", "E4M2", "E4M3", "E5M1", "E5M2", "E6M1", "BF16"};
  } else {
    throw ParseError(std::string(name),
                     "unknown search space (FLIQS-S-int, FLIQS-L-int, FLIQS-S-fp, FLIQS-L-fp)");
  }
  std::vector<NumericFormat> formats;
  for (auto n : names) formats.push_back(parse_format(n));
  return formats;
}

}  // namespace fliqs
