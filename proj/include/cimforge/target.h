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

#include "cimforge/micros.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace cimforge {

/// Description of a single RRAM crossbar CIM core.
///
/// rows_n is the number of crossbar input rows (N), cols_m the number of
/// output columns (M). Cells hold r_cell bits, the row DACs r_dac bits.
/// [b_min, b_max] is the bit-width range explored by the search and the
/// latency lookup table. Immutable once validated.
struct CimTarget {
  std::int64_t rows_n = 256;
  std::int64_t cols_m = 256;
  int r_cell = 4;
  int r_dac = 1;
  Micros t_write = Micros::fromInteger(56);
  Micros t_mvm = Micros::fromTicks(1'400'000);
  int b_min = 2;
  int b_max = 8;

  /// Throws ValidationError naming the first offending field.
  void validate() const;

  /// Largest value a single cell can hold.
  std::int64_t maxCell() const { return (std::int64_t{1} << r_cell) - 1; }
  /// Largest value a single DAC cycle can apply to a row.
  std::int64_t maxDacInput() const { return (std::int64_t{1} << r_dac) - 1; }
  /// Number of bit widths per lookup-table axis.
  int bitRangeSize() const { return b_max - b_min + 1; }

  bool operator==(const CimTarget &) const = default;
};

/// Parses and validates a target description.
CimTarget parseTarget(const nlohmann::json &j);
nlohmann::json targetToJson(const CimTarget &target);

/// Loads a target file. Errors name the path or the offending field.
CimTarget loadTarget(const std::filesystem::path &path);
void saveTarget(const CimTarget &target, const std::filesystem::path &path);

} // namespace cimforge
