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

#include "cimforge/cost_model.h"
#include "cimforge/error.h"
#include "cimforge/rng.h"
#include "cimforge/xbar_sim.h"

#include <doctest.h>

#include <vector>

using namespace cimforge;
using namespace cimforge::xbar;

namespace {

CimTarget makeTarget(std::int64_t rows, std::int64_t cols, int rCell, int rDac) {
  CimTarget t;
  t.rows_n = rows;
  t.cols_m = cols;
  t.r_cell = rCell;
  t.r_dac = rDac;
  return t;
}

std::vector<std::int64_t> gemv(const IntMatrix &w, std::span<const std::int32_t> x) {
  std::vector<std::int64_t> y(static_cast<std::size_t>(w.cols), 0);
  for (std::int64_t k = 0; k < w.cols; ++k) {
    for (std::int64_t j = 0; j < w.rows; ++j) {
      y[static_cast<std::size_t>(k)] +=
          std::int64_t{w.at(j, k)} * x[static_cast<std::size_t>(j)];
    }
  }
  return y;
}

IntMatrix randomWeights(Rng &rng, std::int64_t n, std::int64_t m, std::int64_t maxAbs) {
  IntMatrix w(n, m);
  for (auto &v : w.values) {
    v = static_cast<std::int32_t>(rng.uniformInt(-maxAbs, maxAbs));
  }
  return w;
}

std::vector<std::int32_t> randomInput(Rng &rng, std::int64_t n, int aBit, bool aSigned) {
  const std::int64_t hi = aSigned ? (std::int64_t{1} << (aBit - 1)) - 1 : (std::int64_t{1} << aBit) - 1;
  const std::int64_t lo = aSigned ? -hi : 0;
  std::vector<std::int32_t> x(static_cast<std::size_t>(n));
  for (auto &v : x) {
    v = static_cast<std::int32_t>(rng.uniformInt(lo, hi));
  }
  return x;
}

} // namespace

TEST_CASE("slice and plane counts") {
  CHECK(weightSliceCount(8, 4) == 2);
  CHECK(weightSliceCount(6, 2) == 3);
  CHECK(weightSliceCount(5, 4) == 2);
  CHECK(weightSliceCount(3, 4) == 1);
  CHECK(inputPlaneCount(8, 1) == 8);
  CHECK(inputPlaneCount(7, 2) == 4);
}

TEST_CASE("map_weights examples") {
  auto t = makeTarget(256, 256, 2, 1);
  IntMatrix w(1, 1);
  w.at(0, 0) = -5;
  auto s = mapWeights(w, 4, t);
  CHECK(s.slice_weights == std::vector<std::int64_t>{1, 4});
  REQUIRE(s.tiles.size() == 2);
  CHECK(s.tiles[0].g_neg.at(0, 0) == 1);
  CHECK(s.tiles[1].g_neg.at(0, 0) == 1);
  CHECK(s.tiles[0].g_pos.at(0, 0) == 0);
  CHECK(s.tiles[1].g_pos.at(0, 0) == 0);
  CHECK(s.reconstruct() == w);

  w.at(0, 0) = 0;
  s = mapWeights(w, 4, t);
  for (const auto &tile : s.tiles) {
    CHECK(tile.g_pos.at(0, 0) == 0);
    CHECK(tile.g_neg.at(0, 0) == 0);
  }

  t.r_cell = 4;
  w.at(0, 0) = 7;
  s = mapWeights(w, 8, t);
  CHECK(s.slice_weights == std::vector<std::int64_t>{1, 16});
  REQUIRE(s.tiles.size() == 2);
  CHECK(s.tiles[0].g_pos.at(0, 0) == 7);
  CHECK(s.tiles[1].g_pos.at(0, 0) == 0);
  CHECK(s.tiles[0].g_neg.at(0, 0) == 0);

  w.at(0, 0) = 8;
  CHECK_THROWS_WITH_AS(mapWeights(w, 4, t), doctest::Contains("(0, 0)"), ValidationError);
}

TEST_CASE("reconstruction over tiles") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int rCell = static_cast<int>(rng.uniformInt(1, 4));
    const auto t = makeTarget(rng.uniformInt(1, 9), rng.uniformInt(1, 9), rCell, 1);
    const int wBit = static_cast<int>(rng.uniformInt(2, 8));
    const auto w = randomWeights(rng, rng.uniformInt(1, 20), rng.uniformInt(1, 20),
                                 (std::int64_t{1} << (wBit - 1)) - 1);
    const auto s = mapWeights(w, wBit, t);
    REQUIRE(s.row_tiles == (w.rows + t.rows_n - 1) / t.rows_n);
    REQUIRE(s.col_tiles == (w.cols + t.cols_m - 1) / t.cols_m);
    REQUIRE(s.tiles.size() ==
            static_cast<std::size_t>(s.row_tiles * s.col_tiles * weightSliceCount(wBit, rCell)));
    REQUIRE(s.reconstruct() == w);
    for (const auto &tile : s.tiles) {
      for (auto v : tile.g_pos.values) {
        REQUIRE(v <= t.maxCell());
      }
      for (auto v : tile.g_neg.values) {
        REQUIRE(v <= t.maxCell());
      }
    }
  }
}

TEST_CASE("crossbar write and mvm") {
  const auto t = makeTarget(4, 3, 4, 1);
  Crossbar xb(t);
  CellMatrix pos(2, 2);
  CellMatrix neg(2, 2);
  pos.at(1, 0) = 3;
  neg.at(1, 0) = 1;
  xb.write(pos, neg);
  CHECK(xb.writeCount() == 1);

  std::vector<std::uint8_t> v(4, 0);
  CHECK(xb.mvm(v) == std::vector<std::int64_t>{0, 0, 0});
  v[1] = 1;
  CHECK(xb.mvm(v) == std::vector<std::int64_t>{2, 0, 0});
  CHECK(xb.mvmCount() == 2);

  v[0] = 2;
  CHECK_THROWS_AS(xb.mvm(v), ValidationError);
  CHECK_THROWS_AS(xb.mvm(std::vector<std::uint8_t>(3, 0)), ValidationError);

  pos.at(0, 0) = 16;
  CHECK_THROWS_AS(xb.write(pos, neg), ValidationError);
  CHECK_THROWS_AS(xb.write(CellMatrix(5, 1), CellMatrix(5, 1)), ValidationError);
  CHECK(xb.writeCount() == 1);
}

TEST_CASE("full occupancy of a 256x256 crossbar") {
  const CimTarget t;
  Crossbar xb(t);
  CellMatrix pos(256, 256, 15);
  CellMatrix neg(256, 256, 0);
  xb.write(pos, neg);
  CHECK(xb.writeCount() == 1);
  std::vector<std::uint8_t> v(256, 1);
  const auto out = xb.mvm(v);
  CHECK(out.size() == 256);
  CHECK(out[0] == 15 * 256);
  CHECK(out[255] == 15 * 256);
}

TEST_CASE("crossbar mvm equals dense product of the stored difference") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int rDac = static_cast<int>(rng.uniformInt(1, 3));
    const auto t = makeTarget(rng.uniformInt(1, 12), rng.uniformInt(1, 12), 3, rDac);
    Crossbar xb(t);
    CellMatrix pos(t.rows_n, t.cols_m);
    CellMatrix neg(t.rows_n, t.cols_m);
    for (auto &c : pos.values) {
      c = static_cast<std::uint8_t>(rng.uniformInt(0, t.maxCell()));
    }
    for (auto &c : neg.values) {
      c = static_cast<std::uint8_t>(rng.uniformInt(0, t.maxCell()));
    }
    xb.write(pos, neg);
    std::vector<std::uint8_t> v(static_cast<std::size_t>(t.rows_n));
    for (auto &e : v) {
      e = static_cast<std::uint8_t>(rng.uniformInt(0, t.maxDacInput()));
    }
    const auto out = xb.mvm(v);
    for (std::int64_t k = 0; k < t.cols_m; ++k) {
      std::int64_t want = 0;
      for (std::int64_t j = 0; j < t.rows_n; ++j) {
        want += v[static_cast<std::size_t>(j)] * (pos.at(j, k) - neg.at(j, k));
      }
      REQUIRE(out[static_cast<std::size_t>(k)] == want);
    }
  }
}

TEST_CASE("sliced mvm examples") {
  IntMatrix w(2, 1);
  w.at(0, 0) = -5;
  w.at(1, 0) = 3;
  const std::vector<std::int32_t> x{2, 3};
  for (int rCell : {1, 2, 4}) {
    for (int rDac : {1, 2}) {
      const auto t = makeTarget(1, 1, rCell, rDac);
      CHECK(slicedMvm(w, x, 4, 2, false, t) == std::vector<std::int32_t>{-1});
    }
  }
  const std::vector<std::int32_t> zeros{0, 0};
  CHECK(slicedMvm(w, zeros, 4, 3, true, makeTarget(8, 8, 2, 2)) ==
        std::vector<std::int32_t>{0});
}

TEST_CASE("bit planes recombine") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const int aBit = static_cast<int>(rng.uniformInt(2, 8));
    const int rDac = static_cast<int>(rng.uniformInt(1, 3));
    const bool aSigned = rng.uniform() < 0.5;
    const auto x = randomInput(rng, 10, aBit, aSigned);
    const auto p = sliceInput(x, aBit, aSigned, rDac);
    REQUIRE(p.planes.size() == static_cast<std::size_t>(inputPlaneCount(aBit, rDac)));
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::int64_t v = p.offset_factor;
      for (std::size_t b = 0; b < p.planes.size(); ++b) {
        REQUIRE(p.planes[b][i] < (1 << rDac));
        v += p.factors[b] * p.planes[b][i];
      }
      REQUIRE(v == x[i]);
    }
  }
}

TEST_CASE("sliced mvm is bit-exact on random cases") {
  Rng rng(20240601);
  const std::vector<std::pair<std::int64_t, std::int64_t>> dims{{8, 8}, {17, 17}, {256, 256}};
  for (int trial = 0; trial < 600; ++trial) {
    const auto [rows, cols] = dims[static_cast<std::size_t>(rng.uniformInt(0, 2))];
    const int rCell = std::vector<int>{1, 2, 4}[static_cast<std::size_t>(rng.uniformInt(0, 2))];
    const int rDac = static_cast<int>(rng.uniformInt(1, 2));
    const auto t = makeTarget(rows, cols, rCell, rDac);
    const int wBit = static_cast<int>(rng.uniformInt(2, 8));
    const int aBit = static_cast<int>(rng.uniformInt(2, 8));
    const bool aSigned = rng.uniform() < 0.5;
    const auto n = rng.uniformInt(1, 64);
    const auto m = rng.uniformInt(1, 64);
    const auto w = randomWeights(rng, n, m, (std::int64_t{1} << (wBit - 1)) - 1);
    const auto x = randomInput(rng, n, aBit, aSigned);
    const auto got = slicedMvm(w, x, wBit, aBit, aSigned, t);
    const auto want = gemv(w, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      REQUIRE(got[k] == want[k]);
    }
  }
}

TEST_CASE("accumulator overflow is detected") {
  IntMatrix w(2, 1);
  w.at(0, 0) = 1;
  w.at(1, 0) = 1;
  const std::vector<std::int32_t> x{1 << 30, 1 << 30};
  CHECK_THROWS_AS(checkAccumulatorBound(w, x), OverflowError);
  const std::vector<std::int32_t> ok{(1 << 30) - 1, 1 << 30};
  CHECK_NOTHROW(checkAccumulatorBound(w, ok));
}

TEST_CASE("packed weights match the write count") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int rCell = static_cast<int>(rng.uniformInt(1, 4));
    const auto t = makeTarget(rng.uniformInt(1, 20), rng.uniformInt(1, 20), rCell, 1);
    const int wBit = static_cast<int>(rng.uniformInt(2, 8));
    const auto n = rng.uniformInt(1, 40);
    const auto m = rng.uniformInt(1, 40);
    const auto w = randomWeights(rng, n, m, (std::int64_t{1} << (wBit - 1)) - 1);
    const auto packed = packWeights(w, wBit, t);
    const auto layer = cost::denseLayer("l", m, n);
    REQUIRE(packed.tiles.size() == cost::nWrite(layer, wBit, t));

    // Every (column, slice, sign) digit column appears exactly once.
    std::vector<int> seen(static_cast<std::size_t>(m * packed.slices * 2), 0);
    for (const auto &tile : packed.tiles) {
      if (tile.row_tile != 0) {
        continue;
      }
      for (const auto &slot : tile.slots) {
        if (slot) {
          ++seen[static_cast<std::size_t>((slot->column * packed.slices + slot->slice) * 2 +
                                          (slot->negative ? 1 : 0))];
        }
      }
    }
    for (auto s : seen) {
      REQUIRE(s == 1);
    }

    // Feeding all-ones planes through every tile reproduces column sums.
    std::vector<std::int64_t> acc(static_cast<std::size_t>(m), 0);
    for (const auto &tile : packed.tiles) {
      Crossbar xb(t);
      xb.write(tile.g_pos, tile.g_neg);
      std::vector<std::uint8_t> v(static_cast<std::size_t>(t.rows_n), 0);
      std::fill_n(v.begin(), tile.row_count, 1);
      accumulatePacked(packed, tile, xb.mvm(v), 1, acc);
    }
    for (std::int64_t k = 0; k < m; ++k) {
      std::int64_t want = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        want += w.at(j, k);
      }
      REQUIRE(acc[static_cast<std::size_t>(k)] == want);
    }
  }
}
