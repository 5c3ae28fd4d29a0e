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

#include "cimforge/target.h"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cimforge::xbar {

/// Dense row-major matrix.
template <typename T> struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c, T fill = T{})
      : rows(r), cols(c), values(static_cast<std::size_t>(r * c), fill) {}

  T &at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * cols + c)]; }
  const T &at(std::int64_t r, std::int64_t c) const {
    return values[static_cast<std::size_t>(r * cols + c)];
  }
  bool operator==(const Matrix &) const = default;
};

using IntMatrix = Matrix<std::int32_t>;
/// Cell conductance levels; r_cell ≤ 8 so one byte per cell suffices.
using CellMatrix = Matrix<std::uint8_t>;

/// Number of weight bit slices: ceil(w_bit / r_cell). The top slice of a
/// signed weight may be all zero; it is still counted.
int weightSliceCount(int wBit, int rCell);
/// Number of input bit planes: ceil(a_bit / r_dac).
int inputPlaneCount(int aBit, int rDac);

/// Which integer range the stored operand uses.
enum class OperandRange { Signed, Unsigned };

/// Largest magnitude a w_bit operand may have in the given range.
std::int64_t maxOperandMagnitude(int wBit, OperandRange range);

// ---------------------------------------------------------------------------
// Crossbar state
// ---------------------------------------------------------------------------

/// Differential 1T1R crossbar with rows_n inputs and cols_m columns.
///
/// Column k computes i_k = sum_j v_j * (g_pos[j][k] - g_neg[j][k]).
/// Single writer; counters only ever increase.
class Crossbar {
public:
  explicit Crossbar(const CimTarget &target);

  /// Programs a tile at the origin; cells outside the tile are zeroed.
  /// Counts as exactly one write.
  void write(const CellMatrix &gPos, const CellMatrix &gNeg);

  /// One analog MVM cycle. Every v_j must lie in [0, 2^r_dac - 1] and v must
  /// have rows_n entries.
  std::vector<std::int64_t> mvm(std::span<const std::uint8_t> v);

  std::uint64_t writeCount() const { return writeCount_; }
  std::uint64_t mvmCount() const { return mvmCount_; }
  const CellMatrix &gPos() const { return gPos_; }
  const CellMatrix &gNeg() const { return gNeg_; }
  const CimTarget &target() const { return target_; }

private:
  CimTarget target_;
  CellMatrix gPos_;
  CellMatrix gNeg_;
  std::vector<std::int16_t> diff_; // g_pos - g_neg, cached on write
  std::uint64_t writeCount_ = 0;
  std::uint64_t mvmCount_ = 0;
};

// ---------------------------------------------------------------------------
// Weight slicing (one slice per crossbar image)
// ---------------------------------------------------------------------------

struct DifferentialTile {
  CellMatrix g_pos;
  CellMatrix g_neg;
  std::int64_t row_tile = 0;
  std::int64_t col_tile = 0;
  /// Offsets of the tile's first row and column in the weight matrix.
  std::int64_t row_begin = 0;
  std::int64_t col_begin = 0;
  int slice = 0;
};

/// Weight matrix (N_l inputs x M_l outputs) split into differential
/// base-2^r_cell digits and crossbar-sized tiles.
struct SlicedWeights {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  int w_bit = 0;
  int r_cell = 0;
  std::int64_t row_tiles = 0;
  std::int64_t col_tiles = 0;
  /// 2^(s * r_cell), least significant slice first.
  std::vector<std::int64_t> slice_weights;
  /// Ordered by slice, then row tile, then column tile.
  std::vector<DifferentialTile> tiles;

  /// sum_s slice_weight_s * (g_pos_s - g_neg_s), reassembled over tiles.
  IntMatrix reconstruct() const;
};

/// Splits w into w+ / w- magnitudes, decomposes them into ceil(w_bit/r_cell)
/// digits and tiles rows by rows_n and columns by cols_m.
SlicedWeights mapWeights(const IntMatrix &w, int wBit, const CimTarget &target,
                         OperandRange range = OperandRange::Signed);

// ---------------------------------------------------------------------------
// Input bit slicing
// ---------------------------------------------------------------------------

/// Bit-plane decomposition of an integer input vector.
///
/// x = sum_b factor_b * plane_b + offset_factor * 1. Unsigned inputs use
/// plain binary planes. Signed inputs use two's complement: when the most
/// significant plane holds only the sign bit it carries factor -2^(a_bit-1);
/// when it holds more bits (r_dac > 1) it is fed in offset binary and the
/// constant -2^(a_bit-1) is restored on the host through offset_factor.
struct BitPlanes {
  std::vector<std::vector<std::uint8_t>> planes;
  std::vector<std::int64_t> factors;
  std::int64_t offset_factor = 0;
};

BitPlanes sliceInput(std::span<const std::int32_t> x, int aBit, bool aSigned, int rDac);

/// Shift amounts of each plane and each slice, as recorded in traces.
struct ShiftPlan {
  std::vector<std::int64_t> plane_factors;
  std::int64_t offset_factor = 0;
  std::vector<std::int64_t> slice_weights;
};
ShiftPlan shiftPlan(int wBit, int aBit, bool aSigned, const CimTarget &target);

/// Throws OverflowError unless sum_j |w_jk| * |x_j| < 2^31 for every column.
void checkAccumulatorBound(const IntMatrix &w, std::span<const std::int32_t> x);

/// Full bit-sliced execution of w^T x on a simulated crossbar.
///
/// Every weight slice tile is written once, then each input plane is applied
/// and the column currents are recombined by host shift-add. The result is
/// exact in 32-bit arithmetic.
std::vector<std::int32_t> slicedMvm(const IntMatrix &w, std::span<const std::int32_t> x,
                                    int wBit, int aBit, bool aSigned, const CimTarget &target);

// ---------------------------------------------------------------------------
// Column-packed layout used by compiled traces
// ---------------------------------------------------------------------------

/// One physical crossbar column in a packed image holds either the positive
/// or the negative digit column of one (output column, slice) pair.
struct ColumnSlot {
  std::int64_t column = 0;
  int slice = 0;
  bool negative = false;
};

struct PackedTile {
  std::int64_t col_tile = 0;
  std::int64_t row_tile = 0;
  std::int64_t row_begin = 0;
  std::int64_t row_count = 0;
  CellMatrix g_pos;
  CellMatrix g_neg;
  std::vector<std::optional<ColumnSlot>> slots;
  /// sum over the tile rows of (g_pos - g_neg), per physical column.
  std::vector<std::int64_t> column_sums;
};

/// Weight matrix packed so that the 2 * M_l * slices digit columns fill
/// consecutive crossbar columns. Produces exactly
/// ceil(2 M_l slices / M) * ceil(N_l / N) images.
struct PackedWeights {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  int w_bit = 0;
  int slices = 0;
  std::int64_t col_tiles = 0;
  std::int64_t row_tiles = 0;
  std::vector<std::int64_t> slice_weights;
  /// Column tile major, row tile minor.
  std::vector<PackedTile> tiles;
  /// sum_j |w_jk| per output column.
  std::vector<std::int64_t> abs_column_sums;

  const PackedTile &tile(std::int64_t colTile, std::int64_t rowTile) const {
    return tiles[static_cast<std::size_t>(colTile * row_tiles + rowTile)];
  }
};

PackedWeights packWeights(const IntMatrix &w, int wBit, const CimTarget &target,
                          OperandRange range = OperandRange::Signed);

/// Host shift-add of one MVM result of a packed tile into per-column
/// accumulators: acc[k] += factor * slice_weight * i_c for every used column c.
void accumulatePacked(const PackedWeights &packed, const PackedTile &tile,
                      std::span<const std::int64_t> columnOut, std::int64_t factor,
                      std::span<std::int64_t> acc);

/// Restores the offset-binary constant of a signed top plane.
void applyOffsetCorrection(const PackedWeights &packed, const PackedTile &tile,
                           std::int64_t offsetFactor, std::span<std::int64_t> acc);

} // namespace cimforge::xbar
