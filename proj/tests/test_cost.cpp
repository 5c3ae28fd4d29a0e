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
#include "cimforge/quant_config.h"
#include "cimforge/rng.h"

#include <doctest.h>

#include <sstream>

using namespace cimforge;
using namespace cimforge::cost;

namespace {

std::uint64_t ceilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Independent evaluation of the write count with rational arithmetic:
/// ceil((2 M_l / M) * s) == ceil(2 M_l s / M) for integer s.
std::uint64_t writesOracle(std::int64_t mL, std::int64_t nL, int wBit, const CimTarget &t) {
  const auto s = ceilDiv(static_cast<std::uint64_t>(wBit), static_cast<std::uint64_t>(t.r_cell));
  return ceilDiv(2 * static_cast<std::uint64_t>(mL) * s, static_cast<std::uint64_t>(t.cols_m)) *
         ceilDiv(static_cast<std::uint64_t>(nL), static_cast<std::uint64_t>(t.rows_n));
}

} // namespace

TEST_CASE("gemm dims") {
  CHECK(gemmDims({3, 64, 3, 3, 112, 112}) == GemmDims{64, 27, 12544});
  CHECK(gemmDims({5, 9, 1, 1, 1, 1}) == GemmDims{9, 5, 1});
  CHECK(gemmDims({1, 1, 1, 1, 1, 1}) == GemmDims{1, 1, 1});
  const auto l = convLayer("c", {3, 64, 3, 3, 112, 112});
  CHECK(l.m_l == 64);
  CHECK(l.n_l == 27);
  CHECK(l.v_l == 12544);
}

TEST_CASE("n_write examples") {
  CimTarget t;
  CHECK(nWrite(denseLayer("a", 64, 128), 8, t) == 1);
  t.r_cell = 2;
  CHECK(nWrite(denseLayer("b", 512, 300), 6, t) == 24);
  t.r_cell = 4;
  CHECK(nWrite(denseLayer("c", 128, 256), 4, t) == 1);
}

TEST_CASE("n_mvm examples") {
  const CimTarget t;
  const auto l = denseLayer("a", 64, 128);
  CHECK(nMvm(l, 8, 8, t) == 8);
  CHECK(nMvm(l, 8, 1, t) == 1);
  CHECK(nMvm(l, 8, 4, t) * 2 == nMvm(l, 8, 8, t));
}

TEST_CASE("total latency examples") {
  const CimTarget t;
  const auto l = denseLayer("fc", 64, 128);
  const auto cfg = QuantConfig::uniform({"fc"}, 8);
  CHECK(totalLatency({l}, cfg, t) == Micros::parse("67.2"));
  CHECK(totalLatency({l}, cfg, t).toString() == "67.2");
  CHECK(totalLatency({}, QuantConfig{}, t) == Micros{});

  auto rep = l;
  rep.kind = LayerKind::MatMul;
  rep.r_repeat = 12;
  CHECK(totalLatency({rep}, cfg, t) == Micros::parse("67.2") * 12);

  CHECK_THROWS_AS(totalLatency({l}, QuantConfig::uniform({"other"}, 8), t), ValidationError);
}

TEST_CASE("counts agree with a rational oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    CimTarget t;
    t.rows_n = rng.uniformInt(1, 300);
    t.cols_m = rng.uniformInt(1, 300);
    t.r_cell = static_cast<int>(rng.uniformInt(1, 4));
    t.r_dac = static_cast<int>(rng.uniformInt(1, 3));
    const auto mL = rng.uniformInt(1, 1000);
    const auto nL = rng.uniformInt(1, 1000);
    const auto vL = rng.uniformInt(1, 50);
    const int wBit = static_cast<int>(rng.uniformInt(2, 8));
    const int aBit = static_cast<int>(rng.uniformInt(2, 8));
    const auto l = denseLayer("d", mL, nL, vL);
    const auto w = writesOracle(mL, nL, wBit, t);
    REQUIRE(nWrite(l, wBit, t) == w);
    REQUIRE(nMvm(l, wBit, aBit, t) ==
            static_cast<std::uint64_t>(vL) * w * ceilDiv(static_cast<std::uint64_t>(aBit), static_cast<std::uint64_t>(t.r_dac)));
  }
}

TEST_CASE("count monotonicity") {
  const CimTarget t;
  const auto l = convLayer("c", {64, 128, 3, 3, 28, 28});
  for (int a = 2; a <= 8; ++a) {
    for (int w = 2; w < 8; ++w) {
      CHECK(nWrite(l, w, t) <= nWrite(l, w + 1, t));
      CHECK(nMvm(l, w, a, t) <= nMvm(l, w + 1, a, t));
    }
  }
  for (int w = 2; w <= 8; ++w) {
    for (int a = 2; a < 8; ++a) {
      CHECK(nMvm(l, w, a, t) <= nMvm(l, w, a + 1, t));
    }
    // r_dac = 1: cycles are linear in the activation width.
    CHECK(nMvm(l, w, 6, t) == 6 * nMvm(l, w, 1, t));
  }
}

TEST_CASE("latency lookup table") {
  const CimTarget t;
  const std::vector<LayerDesc> layers{convLayer("c1", {3, 64, 3, 3, 32, 32}),
                                      denseLayer("fc", 10, 4096),
                                      matmulLayer("mm", 49, 64, 49, 12)};
  const auto lut = buildLut(layers, t);
  CHECK(lut.layerCount() == 3);
  CHECK(lut.entriesPerLayer() == 49);

  Micros baseline;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (int w = 2; w <= 8; ++w) {
      for (int a = 2; a <= 8; ++a) {
        REQUIRE(lut.at(i, w, a) == layerLatency(layers[i], w, a, t));
        if (a < 8) {
          REQUIRE(lut.at(i, w, a) <= lut.at(i, w, a + 1));
        }
        if (w < 8) {
          REQUIRE(lut.at(i, w, a) <= lut.at(i, w + 1, a));
        }
      }
    }
    baseline += lut.at(i, 8, 8);
  }
  const auto cfg = QuantConfig::uniform({"c1", "fc", "mm"}, 8);
  CHECK(totalLatency(layers, cfg, t) == baseline);

  std::ostringstream csv;
  writeLutCsv(lut, csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer_id,w_bit,a_bit,latency_us");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
  }
  CHECK(rows == 3 * 49);
}

TEST_CASE("speedup and score") {
  const auto s = speedupAndScore(2.37, 1.0, 70.0, 70.0 - 0.812);
  CHECK(s.speedup == doctest::Approx(2.37));
  CHECK(s.s_al == doctest::Approx(2.37 / 0.812).epsilon(1e-12));

  const auto same = speedupAndScore(Micros::fromInteger(10), Micros::fromInteger(10), 70.0, 69.0);
  CHECK(same.speedup == 1.0);
  CHECK(same.s_al == 1.0);

  const auto lossless = speedupAndScore(2.0, 1.0, 70.0, 70.0);
  CHECK(lossless.s_al == doctest::Approx(2.0 / kSalEpsilon));
  CHECK_THROWS_AS(speedupAndScore(1.0, 0.0, 70.0, 70.0), ValidationError);
}
