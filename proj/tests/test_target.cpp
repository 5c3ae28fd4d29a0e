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

#include "cimforge/error.h"
#include "cimforge/target.h"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace cimforge;

namespace {

std::filesystem::path scratch(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / "cimforge_test_target";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void writeText(const std::filesystem::path &p, const std::string &text) {
  std::ofstream(p) << text;
}

} // namespace

TEST_CASE("load the 256x256 target") {
  const auto p = scratch("default.json");
  writeText(p, R"({"rows_n": 256, "cols_m": 256, "r_cell": 4, "r_dac": 1,
                   "t_write_us": "56", "t_mvm_us": "1.4", "b_min": 2, "b_max": 8})");
  const auto t = loadTarget(p);
  CHECK(t.rows_n == 256);
  CHECK(t.cols_m == 256);
  CHECK(t.r_cell == 4);
  CHECK(t.r_dac == 1);
  CHECK(t.t_write == Micros::fromInteger(56));
  CHECK(t.t_mvm == Micros::parse("1.4"));
  CHECK(t.b_min == 2);
  CHECK(t.b_max == 8);
  CHECK(t.bitRangeSize() == 7);
  CHECK(t == CimTarget{});
}

TEST_CASE("invalid fields are named") {
  auto j = targetToJson(CimTarget{});
  j["r_cell"] = 0;
  try {
    parseTarget(j);
    FAIL("expected a validation error");
  } catch (const ValidationError &e) {
    CHECK(std::string(e.what()) == "r_cell must be ≥ 1");
  }

  j = targetToJson(CimTarget{});
  j["b_min"] = 9;
  CHECK_THROWS_AS(parseTarget(j), ValidationError);
  j = targetToJson(CimTarget{});
  j["rows_n"] = 0;
  CHECK_THROWS_WITH_AS(parseTarget(j), "rows_n must be ≥ 1", ValidationError);
  j = targetToJson(CimTarget{});
  j["extra"] = 1;
  CHECK_THROWS_AS(parseTarget(j), ParseError);
  j = targetToJson(CimTarget{});
  j["t_mvm_us"] = "fast";
  CHECK_THROWS_AS(parseTarget(j), ParseError);
}

TEST_CASE("missing file names the path") {
  const auto p = scratch("does_not_exist.json");
  std::filesystem::remove(p);
  try {
    loadTarget(p);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find(p.string()) != std::string::npos);
  }
}

TEST_CASE("target round-trip") {
  CimTarget t;
  t.rows_n = 17;
  t.cols_m = 23;
  t.r_cell = 2;
  t.r_dac = 2;
  t.t_write = Micros::parse("12.345678");
  t.t_mvm = Micros::parse("0.25");
  t.b_min = 3;
  t.b_max = 7;
  const auto p = scratch("odd.json");
  saveTarget(t, p);
  const auto back = loadTarget(p);
  CHECK(back == t);
  CHECK(targetToJson(back) == targetToJson(t));
}
