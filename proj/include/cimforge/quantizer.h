/**
 * Copyright (c) 2026 The cimforge Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cimforge::quant {

/// Symmetric, per-tensor quantized tensor. zero_point is always 0.
struct QTensor {
  std::vector<std::int32_t> data;
  std::vector<std::int64_t> shape;
  double scale = 1.0;
  int zero_point = 0;
  int bits = 8;
  bool is_signed = true;
};

/// Largest representable level: 2^(B-1)-1 signed, 2^B-1 unsigned.
constexpr std::int64_t levelMax(int bits, bool isSigned) {
  return isSigned ? (std::int64_t{1} << (bits - 1)) - 1 : (std::int64_t{1} << bits) - 1;
}
/// Smallest representable level. The signed range is symmetric and never
/// uses -2^(B-1).
constexpr std::int64_t levelMin(int bits, bool isSigned) {
  return isSigned ? -levelMax(bits, true) : 0;
}

/// Rounds to nearest, ties away from zero. Used for every rounding step.
double roundHalfAway(double x);

std::int64_t clampLevel(std::int64_t v, int bits, bool isSigned);

/// True when every element lies in the range implied by bits/is_signed.
bool inRange(const QTensor &q);

/// Range-based symmetric quantization; the scale is derived from max |x|
/// (signed) or max x (unsigned). An all-zero input yields zeros with
/// scale 1.
QTensor quantizeSymmetric(std::span<const double> x, int bits, bool isSigned);

/// Quantization with a frozen scale: clip(round(x / scale)).
QTensor quantizeWithScale(std::span<const double> x, double scale, int bits, bool isSigned);

std::vector<double> dequantize(const QTensor &q);

/// Single-element requantization: clip(round(acc * multiplier)).
std::int32_t requantizeValue(std::int64_t acc, double multiplier, int bits, bool isSigned);

/// Rescales 32-bit accumulators from scale s_in*s_w to s_out.
QTensor requantize(std::span<const std::int32_t> acc, double sIn, double sW, double sOut,
                   int bits, bool isSigned);

/// dequantize(quantizeSymmetric(x)).
std::vector<double> fakeQuantForward(std::span<const double> x, int bits, bool isSigned);

/// Straight-through estimator: upstream gradient passes unchanged.
std::vector<double> fakeQuantBackward(std::span<const double> upstreamGrad,
                                      std::span<const double> x);

} // namespace cimforge::quant
