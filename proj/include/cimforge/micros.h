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

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace cimforge {

/// Exact fixed-point duration in microseconds.
///
/// Integer count of picoseconds. Decimal strings with up to six fractional
/// digits convert without loss.
class Micros {
public:
  static constexpr int kFractionDigits = 6;
  static constexpr std::int64_t kTicksPerMicro = 1'000'000;

  constexpr Micros() = default;

  static constexpr Micros fromTicks(std::int64_t ticks) {
    Micros m;
    m.ticks_ = ticks;
    return m;
  }
  static Micros fromInteger(std::int64_t micros);

  /// Parses "56", "1.4", "0.000001". Throws ParseError on anything else,
  /// including values that need more than six fractional digits.
  static Micros parse(std::string_view text);

  constexpr std::int64_t ticks() const { return ticks_; }
  double toDouble() const {
    return static_cast<double>(ticks_) / static_cast<double>(kTicksPerMicro);
  }
  /// Shortest exact decimal form, e.g. "67.2".
  std::string toString() const;

  Micros operator+(Micros other) const;
  Micros &operator+=(Micros other);
  Micros operator*(std::uint64_t count) const;

  constexpr auto operator<=>(const Micros &) const = default;

private:
  std::int64_t ticks_ = 0;
};

} // namespace cimforge
