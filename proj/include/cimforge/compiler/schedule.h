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

#include "cimforge/cost_model.h"
#include "cimforge/target.h"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cimforge::compiler {

/// Loop axis labels, outermost first. Every schedule carries all of them.
///
///  repeat          one pass per attention head (extent 1 elsewhere)
///  outer_col_tile  packed column images, ceil(2 M_l slices / M)
///  outer_row_tile  reduction row images, ceil(N_l / N)
///  weight_slice    digit slices; unrolled across columns, no time steps
///  input_vec       streamed input vectors, V_l
///  input_bit       DAC bit planes, ceil(a_bit / r_dac)
///
/// The tile write sits between outer_row_tile and weight_slice, so a tile
/// stays resident for every vector and bit plane that uses it.
inline constexpr std::array<std::string_view, 6> kAxisLabels = {
    "repeat", "outer_col_tile", "outer_row_tile", "weight_slice", "input_vec", "input_bit"};

struct LoopAxis {
  std::string label;
  std::int64_t extent = 1;
  /// False for axes unrolled in space (weight_slice).
  bool temporal = true;
  bool operator==(const LoopAxis &) const = default;
};

struct LoopNest {
  std::string layer;
  std::vector<LoopAxis> axes;
  /// Label of the axis the tile write is hoisted under.
  std::string write_after = "outer_row_tile";

  const LoopAxis &axis(std::string_view label) const;
  /// Tile writes issued by the nest (all repeats).
  std::uint64_t writes() const;
  /// MVM cycles issued by the nest (all repeats).
  std::uint64_t mvms() const;
  bool operator==(const LoopNest &) const = default;
};

LoopNest schedule(const cost::LayerDesc &layer, int wBit, int aBit, const CimTarget &target);

} // namespace cimforge::compiler
