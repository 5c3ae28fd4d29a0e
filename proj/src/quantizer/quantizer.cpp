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

#include "cimforge/quantizer.h"

#include "cimforge/error.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace cimforge::quant {

namespace {

void checkBits(int bits) {
  if (bits < 1 || bits > 16) {
    throw ValidationError("bit width " + std::to_string(bits) + " outside [1, 16]");
  }
}

} // namespace

double roundHalfAway(double x) { return std::round(x); }

std::int64_t clampLevel(std::int64_t v, int bits, bool isSigned) {
  return std::clamp(v, levelMin(bits, isSigned), levelMax(bits, isSigned));
}

bool inRange(const QTensor &q) {
  const auto lo = levelMin(q.bits, q.is_signed);
  const auto hi = levelMax(q.bits, q.is_signed);
  return q.zero_point == 0 &&
         std::all_of(q.data.begin(), q.data.end(), [&](std::int32_t v) { return v >= lo && v <= hi; });
}

QTensor quantizeSymmetric(std::span<const double> x, int bits, bool isSigned) {
  checkBits(bits);
  QTensor q;
  q.bits = bits;
  q.is_signed = isSigned;
  q.shape = {static_cast<std::int64_t>(x.size())};
  q.data.resize(x.size(), 0);

  double range = 0.0;
  for (double v : x) {
    range = std::max(range, isSigned ? std::fabs(v) : v);
  }
  if (!(range > 0.0)) {
    q.scale = 1.0;
    return q;
  }
  const auto levels = static_cast<double>(levelMax(bits, isSigned));
  q.scale = range / levels;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto level = static_cast<std::int64_t>(roundHalfAway(x[i] * levels / range));
    q.data[i] = static_cast<std::int32_t>(clampLevel(level, bits, isSigned));
  }
  return q;
}

QTensor quantizeWithScale(std::span<const double> x, double scale, int bits, bool isSigned) {
  checkBits(bits);
  if (!(scale > 0.0)) {
    throw ValidationError("quantization scale must be positive");
  }
  QTensor q;
  q.bits = bits;
  q.is_signed = isSigned;
  q.scale = scale;
  q.shape = {static_cast<std::int64_t>(x.size())};
  q.data.resize(x.size());
  const double hi = static_cast<double>(levelMax(bits, isSigned));
  const double lo = static_cast<double>(levelMin(bits, isSigned));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double level = std::clamp(roundHalfAway(x[i] / scale), lo, hi);
    q.data[i] = static_cast<std::int32_t>(level);
  }
  return q;
}

std::vector<double> dequantize(const QTensor &q) {
  std::vector<double> out(q.data.size());
  for (std::size_t i = 0; i < q.data.size(); ++i) {
    out[i] = static_cast<double>(q.data[i]) * q.scale;
  }
  return out;
}

std::int32_t requantizeValue(std::int64_t acc, double multiplier, int bits, bool isSigned) {
  const double hi = static_cast<double>(levelMax(bits, isSigned));
  const double lo = static_cast<double>(levelMin(bits, isSigned));
  const double level = roundHalfAway(static_cast<double>(acc) * multiplier);
  return static_cast<std::int32_t>(std::clamp(level, lo, hi));
}

QTensor requantize(std::span<const std::int32_t> acc, double sIn, double sW, double sOut,
                   int bits, bool isSigned) {
  checkBits(bits);
  if (!(sIn > 0.0) || !(sW > 0.0) || !(sOut > 0.0)) {
    throw ValidationError("requantize scales must be positive");
  }
  const double multiplier = sIn * sW / sOut;
  QTensor q;
  q.bits = bits;
  q.is_signed = isSigned;
  q.scale = sOut;
  q.shape = {static_cast<std::int64_t>(acc.size())};
  q.data.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    q.data[i] = requantizeValue(acc[i], multiplier, bits, isSigned);
  }
  return q;
}

std::vector<double> fakeQuantForward(std::span<const double> x, int bits, bool isSigned) {
  return dequantize(quantizeSymmetric(x, bits, isSigned));
}

std::vector<double> fakeQuantBackward(std::span<const double> upstreamGrad,
                                      std::span<const double> x) {
  if (upstreamGrad.size() != x.size()) {
    throw ValidationError("fake-quant backward: gradient and input sizes differ");
  }
  return {upstreamGrad.begin(), upstreamGrad.end()};
}

} // namespace cimforge::quant
