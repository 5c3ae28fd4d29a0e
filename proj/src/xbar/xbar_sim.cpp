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

#include "cimforge/xbar_sim.h"

#include "cimforge/error.h"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace cimforge::xbar {

namespace {

std::int64_t ceilDiv(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t digit(std::int64_t magnitude, int slice, int rCell) {
  return (magnitude >> (slice * rCell)) & ((std::int64_t{1} << rCell) - 1);
}

void checkWeights(const IntMatrix &w, int wBit, OperandRange range) {
  if (w.rows < 1 || w.cols < 1) {
    throw ValidationError("weight matrix must be at least 1x1");
  }
  const std::int64_t limit = maxOperandMagnitude(wBit, range);
  for (std::int64_t r = 0; r < w.rows; ++r) {
    for (std::int64_t c = 0; c < w.cols; ++c) {
      const std::int64_t v = w.at(r, c);
      if (std::llabs(v) > limit || (range == OperandRange::Unsigned && v < 0)) {
        throw ValidationError("weight at (" + std::to_string(r) + ", " + std::to_string(c) +
                              ") = " + std::to_string(v) + " out of range for " +
                              std::to_string(wBit) + "-bit operand");
      }
    }
  }
}

void checkInputs(std::span<const std::int32_t> x, int aBit, bool aSigned) {
  const std::int64_t lo = aSigned ? -(std::int64_t{1} << (aBit - 1)) : 0;
  const std::int64_t hi =
      aSigned ? (std::int64_t{1} << (aBit - 1)) - 1 : (std::int64_t{1} << aBit) - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo || x[i] > hi) {
      throw ValidationError("input element " + std::to_string(i) + " = " +
                            std::to_string(x[i]) + " out of range for " +
                            std::to_string(aBit) + "-bit " +
                            (aSigned ? "signed" : "unsigned") + " activations");
    }
  }
}

} // namespace

int weightSliceCount(int wBit, int rCell) { return (wBit + rCell - 1) / rCell; }

int inputPlaneCount(int aBit, int rDac) { return (aBit + rDac - 1) / rDac; }

std::int64_t maxOperandMagnitude(int wBit, OperandRange range) {
  return range == OperandRange::Signed ? (std::int64_t{1} << (wBit - 1)) - 1
                                       : (std::int64_t{1} << wBit) - 1;
}

// ---------------------------------------------------------------------------

Crossbar::Crossbar(const CimTarget &target)
    : target_(target), gPos_(target.rows_n, target.cols_m), gNeg_(target.rows_n, target.cols_m),
      diff_(static_cast<std::size_t>(target.rows_n * target.cols_m), 0) {
  target_.validate();
}

void Crossbar::write(const CellMatrix &gPos, const CellMatrix &gNeg) {
  if (gPos.rows != gNeg.rows || gPos.cols != gNeg.cols) {
    throw ValidationError("crossbar write: positive and negative tiles differ in shape");
  }
  if (gPos.rows > target_.rows_n || gPos.cols > target_.cols_m) {
    throw ValidationError("crossbar write: tile " + std::to_string(gPos.rows) + "x" +
                          std::to_string(gPos.cols) + " exceeds crossbar " +
                          std::to_string(target_.rows_n) + "x" + std::to_string(target_.cols_m));
  }
  const std::int64_t maxCell = target_.maxCell();
  for (std::size_t i = 0; i < gPos.values.size(); ++i) {
    if (gPos.values[i] > maxCell || gNeg.values[i] > maxCell) {
      throw ValidationError("crossbar write: cell value " +
                            std::to_string(std::max(gPos.values[i], gNeg.values[i])) +
                            " exceeds 2^r_cell - 1 = " + std::to_string(maxCell));
    }
  }
  std::fill(gPos_.values.begin(), gPos_.values.end(), 0);
  std::fill(gNeg_.values.begin(), gNeg_.values.end(), 0);
  std::fill(diff_.begin(), diff_.end(), 0);
  for (std::int64_t r = 0; r < gPos.rows; ++r) {
    for (std::int64_t c = 0; c < gPos.cols; ++c) {
      gPos_.at(r, c) = gPos.at(r, c);
      gNeg_.at(r, c) = gNeg.at(r, c);
      diff_[static_cast<std::size_t>(r * target_.cols_m + c)] =
          static_cast<std::int16_t>(gPos.at(r, c) - gNeg.at(r, c));
    }
  }
  ++writeCount_;
}

std::vector<std::int64_t> Crossbar::mvm(std::span<const std::uint8_t> v) {
  if (static_cast<std::int64_t>(v.size()) != target_.rows_n) {
    throw ValidationError("crossbar mvm: input has " + std::to_string(v.size()) +
                          " rows, crossbar has " + std::to_string(target_.rows_n));
  }
  const std::int64_t maxIn = target_.maxDacInput();
  std::vector<std::int64_t> out(static_cast<std::size_t>(target_.cols_m), 0);
  const auto cols = static_cast<std::size_t>(target_.cols_m);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] > maxIn) {
      throw ValidationError("crossbar mvm: row " + std::to_string(j) + " input " +
                            std::to_string(v[j]) + " exceeds DAC range");
    }
    if (v[j] == 0) {
      continue;
    }
    const std::int64_t vj = v[j];
    const std::int16_t *row = diff_.data() + j * cols;
    for (std::size_t k = 0; k < cols; ++k) {
      out[k] += vj * row[k];
    }
  }
  ++mvmCount_;
  return out;
}

// ---------------------------------------------------------------------------

IntMatrix SlicedWeights::reconstruct() const {
  IntMatrix w(rows, cols, 0);
  for (const auto &t : tiles) {
    const std::int64_t sw = slice_weights[static_cast<std::size_t>(t.slice)];
    for (std::int64_t r = 0; r < t.g_pos.rows; ++r) {
      for (std::int64_t c = 0; c < t.g_pos.cols; ++c) {
        const std::int64_t d = t.g_pos.at(r, c) - t.g_neg.at(r, c);
        w.at(t.row_begin + r, t.col_begin + c) += static_cast<std::int32_t>(sw * d);
      }
    }
  }
  return w;
}

SlicedWeights mapWeights(const IntMatrix &w, int wBit, const CimTarget &target,
                         OperandRange range) {
  target.validate();
  checkWeights(w, wBit, range);
  SlicedWeights out;
  out.rows = w.rows;
  out.cols = w.cols;
  out.w_bit = wBit;
  out.r_cell = target.r_cell;
  out.row_tiles = ceilDiv(w.rows, target.rows_n);
  out.col_tiles = ceilDiv(w.cols, target.cols_m);
  const int slices = weightSliceCount(wBit, target.r_cell);
  for (int s = 0; s < slices; ++s) {
    out.slice_weights.push_back(std::int64_t{1} << (s * target.r_cell));
  }
  for (int s = 0; s < slices; ++s) {
    for (std::int64_t rt = 0; rt < out.row_tiles; ++rt) {
      for (std::int64_t ct = 0; ct < out.col_tiles; ++ct) {
        DifferentialTile t;
        t.slice = s;
        t.row_tile = rt;
        t.col_tile = ct;
        t.row_begin = rt * target.rows_n;
        t.col_begin = ct * target.cols_m;
        const std::int64_t nr = std::min(target.rows_n, w.rows - t.row_begin);
        const std::int64_t nc = std::min(target.cols_m, w.cols - t.col_begin);
        t.g_pos = CellMatrix(nr, nc);
        t.g_neg = CellMatrix(nr, nc);
        for (std::int64_t r = 0; r < nr; ++r) {
          for (std::int64_t c = 0; c < nc; ++c) {
            const std::int64_t v = w.at(t.row_begin + r, t.col_begin + c);
            const auto d = static_cast<std::uint8_t>(digit(std::llabs(v), s, target.r_cell));
            if (v > 0) {
              t.g_pos.at(r, c) = d;
            } else if (v < 0) {
              t.g_neg.at(r, c) = d;
            }
          }
        }
        out.tiles.push_back(std::move(t));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

BitPlanes sliceInput(std::span<const std::int32_t> x, int aBit, bool aSigned, int rDac) {
  checkInputs(x, aBit, aSigned);
  const int planes = inputPlaneCount(aBit, rDac);
  const std::uint64_t valueMask = (std::uint64_t{1} << aBit) - 1;
  const std::uint64_t planeMask = (std::uint64_t{1} << rDac) - 1;
  const int topBits = aBit - (planes - 1) * rDac;

  BitPlanes out;
  out.planes.assign(static_cast<std::size_t>(planes), std::vector<std::uint8_t>(x.size(), 0));
  for (int b = 0; b < planes; ++b) {
    out.factors.push_back(std::int64_t{1} << (b * rDac));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::uint64_t u = static_cast<std::uint64_t>(static_cast<std::int64_t>(x[i])) & valueMask;
    for (int b = 0; b < planes; ++b) {
      out.planes[static_cast<std::size_t>(b)][i] =
          static_cast<std::uint8_t>((u >> (b * rDac)) & planeMask);
    }
  }
  if (aSigned) {
    auto &top = out.planes.back();
    if (topBits == 1) {
      out.factors.back() = -(std::int64_t{1} << (aBit - 1));
    } else {
      const auto signBit = static_cast<std::uint8_t>(1u << (topBits - 1));
      for (auto &v : top) {
        v ^= signBit;
      }
      out.offset_factor = -(std::int64_t{1} << (aBit - 1));
    }
  }
  return out;
}

ShiftPlan shiftPlan(int wBit, int aBit, bool aSigned, const CimTarget &target) {
  ShiftPlan plan;
  const int planes = inputPlaneCount(aBit, target.r_dac);
  for (int b = 0; b < planes; ++b) {
    plan.plane_factors.push_back(std::int64_t{1} << (b * target.r_dac));
  }
  if (aSigned) {
    const int topBits = aBit - (planes - 1) * target.r_dac;
    if (topBits == 1) {
      plan.plane_factors.back() = -(std::int64_t{1} << (aBit - 1));
    } else {
      plan.offset_factor = -(std::int64_t{1} << (aBit - 1));
    }
  }
  const int slices = weightSliceCount(wBit, target.r_cell);
  for (int s = 0; s < slices; ++s) {
    plan.slice_weights.push_back(std::int64_t{1} << (s * target.r_cell));
  }
  return plan;
}

void checkAccumulatorBound(const IntMatrix &w, std::span<const std::int32_t> x) {
  if (static_cast<std::int64_t>(x.size()) != w.rows) {
    throw ValidationError("input length " + std::to_string(x.size()) +
                          " does not match weight rows " + std::to_string(w.rows));
  }
  constexpr std::int64_t kLimit = std::int64_t{1} << 31;
  for (std::int64_t c = 0; c < w.cols; ++c) {
    std::int64_t bound = 0;
    for (std::int64_t r = 0; r < w.rows; ++r) {
      bound += std::llabs(w.at(r, c)) * std::llabs(x[static_cast<std::size_t>(r)]);
    }
    if (bound >= kLimit) {
      throw OverflowError("accumulator bound exceeded in output column " + std::to_string(c) +
                          ": sum |w||x| = " + std::to_string(bound) + " >= 2^31");
    }
  }
}

std::vector<std::int32_t> slicedMvm(const IntMatrix &w, std::span<const std::int32_t> x,
                                    int wBit, int aBit, bool aSigned, const CimTarget &target) {
  checkAccumulatorBound(w, x);
  const SlicedWeights sliced = mapWeights(w, wBit, target);
  const BitPlanes planes = sliceInput(x, aBit, aSigned, target.r_dac);

  std::vector<std::int64_t> acc(static_cast<std::size_t>(w.cols), 0);
  Crossbar xb(target);
  std::vector<std::uint8_t> rowInput(static_cast<std::size_t>(target.rows_n), 0);
  for (const auto &tile : sliced.tiles) {
    xb.write(tile.g_pos, tile.g_neg);
    const std::int64_t sw = sliced.slice_weights[static_cast<std::size_t>(tile.slice)];
    const std::int64_t nr = tile.g_pos.rows;
    const std::int64_t nc = tile.g_pos.cols;
    for (std::size_t b = 0; b < planes.planes.size(); ++b) {
      std::fill(rowInput.begin(), rowInput.end(), 0);
      for (std::int64_t r = 0; r < nr; ++r) {
        rowInput[static_cast<std::size_t>(r)] =
            planes.planes[b][static_cast<std::size_t>(tile.row_begin + r)];
      }
      const auto out = xb.mvm(rowInput);
      for (std::int64_t c = 0; c < nc; ++c) {
        acc[static_cast<std::size_t>(tile.col_begin + c)] +=
            planes.factors[b] * sw * out[static_cast<std::size_t>(c)];
      }
    }
    if (planes.offset_factor != 0) {
      for (std::int64_t c = 0; c < nc; ++c) {
        std::int64_t sum = 0;
        for (std::int64_t r = 0; r < nr; ++r) {
          sum += tile.g_pos.at(r, c) - tile.g_neg.at(r, c);
        }
        acc[static_cast<std::size_t>(tile.col_begin + c)] += planes.offset_factor * sw * sum;
      }
    }
  }
  return {acc.begin(), acc.end()};
}

// ---------------------------------------------------------------------------

PackedWeights packWeights(const IntMatrix &w, int wBit, const CimTarget &target,
                          OperandRange range) {
  target.validate();
  checkWeights(w, wBit, range);
  PackedWeights out;
  out.rows = w.rows;
  out.cols = w.cols;
  out.w_bit = wBit;
  out.slices = weightSliceCount(wBit, target.r_cell);
  for (int s = 0; s < out.slices; ++s) {
    out.slice_weights.push_back(std::int64_t{1} << (s * target.r_cell));
  }
  const std::int64_t totalSlots = 2 * w.cols * out.slices;
  out.col_tiles = ceilDiv(totalSlots, target.cols_m);
  out.row_tiles = ceilDiv(w.rows, target.rows_n);

  out.abs_column_sums.assign(static_cast<std::size_t>(w.cols), 0);
  for (std::int64_t r = 0; r < w.rows; ++r) {
    for (std::int64_t c = 0; c < w.cols; ++c) {
      out.abs_column_sums[static_cast<std::size_t>(c)] += std::llabs(w.at(r, c));
    }
  }

  for (std::int64_t ct = 0; ct < out.col_tiles; ++ct) {
    for (std::int64_t rt = 0; rt < out.row_tiles; ++rt) {
      PackedTile t;
      t.col_tile = ct;
      t.row_tile = rt;
      t.row_begin = rt * target.rows_n;
      t.row_count = std::min(target.rows_n, w.rows - t.row_begin);
      t.g_pos = CellMatrix(t.row_count, target.cols_m);
      t.g_neg = CellMatrix(t.row_count, target.cols_m);
      t.slots.assign(static_cast<std::size_t>(target.cols_m), std::nullopt);
      t.column_sums.assign(static_cast<std::size_t>(target.cols_m), 0);
      for (std::int64_t c = 0; c < target.cols_m; ++c) {
        const std::int64_t g = ct * target.cols_m + c;
        if (g >= totalSlots) {
          break;
        }
        ColumnSlot slot;
        slot.column = g / (2 * out.slices);
        slot.slice = static_cast<int>((g % (2 * out.slices)) / 2);
        slot.negative = (g % 2) == 1;
        std::int64_t sum = 0;
        for (std::int64_t r = 0; r < t.row_count; ++r) {
          const std::int64_t v = w.at(t.row_begin + r, slot.column);
          if ((slot.negative && v < 0) || (!slot.negative && v > 0)) {
            const auto d = static_cast<std::uint8_t>(digit(std::llabs(v), slot.slice, target.r_cell));
            if (slot.negative) {
              t.g_neg.at(r, c) = d;
              sum -= d;
            } else {
              t.g_pos.at(r, c) = d;
              sum += d;
            }
          }
        }
        t.column_sums[static_cast<std::size_t>(c)] = sum;
        t.slots[static_cast<std::size_t>(c)] = slot;
      }
      out.tiles.push_back(std::move(t));
    }
  }
  return out;
}

void accumulatePacked(const PackedWeights &packed, const PackedTile &tile,
                      std::span<const std::int64_t> columnOut, std::int64_t factor,
                      std::span<std::int64_t> acc) {
  for (std::size_t c = 0; c < tile.slots.size(); ++c) {
    const auto &slot = tile.slots[c];
    if (!slot) {
      continue;
    }
    acc[static_cast<std::size_t>(slot->column)] +=
        factor * packed.slice_weights[static_cast<std::size_t>(slot->slice)] * columnOut[c];
  }
}

void applyOffsetCorrection(const PackedWeights &packed, const PackedTile &tile,
                           std::int64_t offsetFactor, std::span<std::int64_t> acc) {
  if (offsetFactor == 0) {
    return;
  }
  for (std::size_t c = 0; c < tile.slots.size(); ++c) {
    const auto &slot = tile.slots[c];
    if (!slot) {
      continue;
    }
    acc[static_cast<std::size_t>(slot->column)] +=
        offsetFactor * packed.slice_weights[static_cast<std::size_t>(slot->slice)] *
        tile.column_sums[c];
  }
}

} // namespace cimforge::xbar
