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

#include "cimforge/micros.h"

#include "cimforge/error.h"

#include <cctype>
#include <limits>

namespace cimforge {

Micros Micros::fromInteger(std::int64_t micros) {
  std::int64_t ticks = 0;
  if (__builtin_mul_overflow(micros, kTicksPerMicro, &ticks)) {
    throw OverflowError("duration overflows fixed-point range");
  }
  return fromTicks(ticks);
}

Micros Micros::parse(std::string_view text) {
  std::string_view s = text;
  if (s.empty()) {
    throw ParseError("empty duration string");
  }
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int fracDigits = 0;
  bool seenDot = false;
  bool seenDigit = false;
  for (char c : s) {
    if (c == '.') {
      if (seenDot) {
        throw ParseError("malformed duration '" + std::string(text) + "'");
      }
      seenDot = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ParseError("malformed duration '" + std::string(text) + "'");
    }
    seenDigit = true;
    int d = c - '0';
    if (seenDot) {
      if (fracDigits == kFractionDigits) {
        if (d != 0) {
          throw ParseError("duration '" + std::string(text) +
                           "' has more than 6 fractional digits");
        }
        continue;
      }
      frac = frac * 10 + d;
      ++fracDigits;
    } else {
      if (__builtin_mul_overflow(whole, 10, &whole) ||
          __builtin_add_overflow(whole, d, &whole)) {
        throw ParseError("duration '" + std::string(text) + "' out of range");
      }
    }
  }
  if (!seenDigit) {
    throw ParseError("malformed duration '" + std::string(text) + "'");
  }
  for (int i = fracDigits; i < kFractionDigits; ++i) {
    frac *= 10;
  }
  Micros m = fromInteger(whole);
  m.ticks_ += frac;
  if (negative) {
    m.ticks_ = -m.ticks_;
  }
  return m;
}

std::string Micros::toString() const {
  std::int64_t t = ticks_;
  std::string sign;
  if (t < 0) {
    sign = "-";
    t = -t;
  }
  std::string out = sign + std::to_string(t / kTicksPerMicro);
  std::int64_t frac = t % kTicksPerMicro;
  if (frac != 0) {
    std::string digits = std::to_string(frac);
    digits.insert(0, kFractionDigits - digits.size(), '0');
    while (digits.back() == '0') {
      digits.pop_back();
    }
    out += "." + digits;
  }
  return out;
}

Micros Micros::operator+(Micros other) const {
  Micros m;
  if (__builtin_add_overflow(ticks_, other.ticks_, &m.ticks_)) {
    throw OverflowError("latency sum overflows fixed-point range");
  }
  return m;
}

Micros &Micros::operator+=(Micros other) {
  *this = *this + other;
  return *this;
}

Micros Micros::operator*(std::uint64_t count) const {
  if (count > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw OverflowError("latency count overflows fixed-point range");
  }
  Micros m;
  if (__builtin_mul_overflow(ticks_, static_cast<std::int64_t>(count), &m.ticks_)) {
    throw OverflowError("latency product overflows fixed-point range");
  }
  return m;
}

} // namespace cimforge
