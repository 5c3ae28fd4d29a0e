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

#include "cimforge/compiler/schedule.h"

#include "cimforge/error.h"
#include "cimforge/xbar_sim.h"

namespace cimforge::compiler {

const LoopAxis &LoopNest::axis(std::string_view label) const {
  for (const auto &a : axes) {
    if (a.label == label) {
      return a;
    }
  }
  throw ValidationError("loop nest of '" + layer + "' has no axis '" + std::string(label) + "'");
}

std::uint64_t LoopNest::writes() const {
  return static_cast<std::uint64_t>(axis("repeat").extent * axis("outer_col_tile").extent *
                                    axis("outer_row_tile").extent);
}

std::uint64_t LoopNest::mvms() const {
  return writes() *
         static_cast<std::uint64_t>(axis("input_vec").extent * axis("input_bit").extent);
}

LoopNest schedule(const cost::LayerDesc &layer, int wBit, int aBit, const CimTarget &target) {
  layer.validate();
  const std::int64_t slices = xbar::weightSliceCount(wBit, target.r_cell);
  const std::int64_t planes = xbar::inputPlaneCount(aBit, target.r_dac);
  const std::int64_t cols = target.cols_m;
  const std::int64_t rows = target.rows_n;
  LoopNest nest;
  nest.layer = layer.id;
  nest.axes = {
      {"repeat", layer.r_repeat, true},
      {"outer_col_tile", (2 * layer.m_l * slices + cols - 1) / cols, true},
      {"outer_row_tile", (layer.n_l + rows - 1) / rows, true},
      {"weight_slice", slices, false},
      {"input_vec", layer.v_l, true},
      {"input_bit", planes, true},
  };
  return nest;
}

} // namespace cimforge::compiler
