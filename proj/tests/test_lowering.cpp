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

#include "cimforge/compiler/interpreter.h"
#include "cimforge/compiler/lowering.h"
#include "cimforge/compiler/model_io.h"
#include "cimforge/compiler/model_zoo.h"
#include "cimforge/compiler/passes.h"
#include "cimforge/compiler/runtime.h"
#include "cimforge/compiler/schedule.h"
#include "cimforge/cost_model.h"
#include "cimforge/error.h"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace cimforge;
using namespace cimforge::compiler;
using nlohmann::json;

namespace {

QuantConfig randomConfig(const std::vector<std::string> &ids, Rng &rng) {
  QuantConfig c;
  for (const auto &id : ids) {
    c.layers.push_back({id, static_cast<int>(rng.uniformInt(2, 8)),
                        static_cast<int>(rng.uniformInt(2, 8))});
  }
  return c;
}

CimTarget oddTarget() {
  CimTarget t;
  t.rows_n = 17;
  t.cols_m = 23;
  t.r_cell = 2;
  t.r_dac = 2;
  return t;
}

/// Counts, crossbar counters and latency of one compiled model against the
/// cost model.
void checkAgainstCostModel(const CompiledModel &m, const Graph &source, const ValueMap &in) {
  const auto layers = extractLayers(source);
  const auto config = extractConfig(source);
  REQUIRE(layers.size() == m.layers.size());
  const auto run = runInference(m, in);
  REQUIRE(run.layers.size() == layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    const auto *bits = config.find(l.id);
    const auto rep = static_cast<std::uint64_t>(l.r_repeat);
    const auto w = cost::nWrite(l, bits->w_bit, m.target) * rep;
    const auto v = cost::nMvm(l, bits->w_bit, bits->a_bit, m.target) * rep;
    const auto counts = countRecords(m.trace, l.id);
    CHECK(counts.writes == w);
    CHECK(counts.mvms == v);
    CHECK(counts.labels == kAxisLabels.size());
    const auto measured = std::find_if(run.layers.begin(), run.layers.end(),
                                       [&](const LayerMeasurement &x) { return x.id == l.id; });
    REQUIRE(measured != run.layers.end());
    CHECK(measured->writes == w);
    CHECK(measured->mvms == v);
  }
  CHECK(run.latency == cost::totalLatency(layers, config, m.target));
  CHECK(run.latency == m.predictedLatency());
  CHECK(run.outputs == evaluate(m.program, in));
}

} // namespace

TEST_CASE("schedule of a 64x128 dense layer") {
  const CimTarget t;
  const auto nest = schedule(cost::denseLayer("fc", 64, 128), 8, 8, t);
  REQUIRE(nest.axes.size() == kAxisLabels.size());
  for (std::size_t i = 0; i < kAxisLabels.size(); ++i) {
    CHECK(nest.axes[i].label == kAxisLabels[i]);
  }
  CHECK(nest.writes() == 1);
  CHECK(nest.axis("input_bit").extent == 8);
  CHECK(nest.axis("input_vec").extent == 1);
  CHECK(nest.axis("weight_slice").extent == 2);
  CHECK_FALSE(nest.axis("weight_slice").temporal);
  CHECK(nest.mvms() == 8);

  const auto single = schedule(cost::denseLayer("fc", 64, 128), 4, 1, t);
  CHECK(single.mvms() == single.writes());
  CHECK_THROWS_AS(nest.axis("time"), ValidationError);
}

TEST_CASE("schedule extents follow the cost model") {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    CimTarget t;
    t.rows_n = rng.uniformInt(1, 64);
    t.cols_m = rng.uniformInt(1, 64);
    t.r_cell = static_cast<int>(rng.uniformInt(1, 4));
    t.r_dac = static_cast<int>(rng.uniformInt(1, 2));
    const auto l = cost::matmulLayer("mm", rng.uniformInt(1, 9), rng.uniformInt(1, 200),
                                     rng.uniformInt(1, 200), rng.uniformInt(1, 4));
    const int w = static_cast<int>(rng.uniformInt(2, 8));
    const int a = static_cast<int>(rng.uniformInt(2, 8));
    const auto nest = schedule(l, w, a, t);
    const auto rep = static_cast<std::uint64_t>(l.r_repeat);
    REQUIRE(nest.writes() == cost::nWrite(l, w, t) * rep);
    REQUIRE(nest.mvms() == cost::nMvm(l, w, a, t) * rep);
  }
}

TEST_CASE("trace vocabulary and weight-stationary order") {
  const auto m = compileModel(makeToyCnn(QuantConfig::uniform(toyCnnLayerIds(), 8), 1), CimTarget{});
  std::set<std::string> kinds;
  for (const auto &r : m.trace) {
    kinds.insert(std::string(recordKindName(r.kind)));
  }
  CHECK(kinds == std::set<std::string>{"label", "write_tile", "mvm", "host_shift_add",
                                       "host_requantize"});
  CHECK_NOTHROW(checkWeightStationary(m.trace));

  auto broken = m.trace;
  for (std::size_t i = 0; i < broken.size(); ++i) {
    if (broken[i].kind == RecordKind::Mvm) {
      broken[i].col_tile += 1;
      break;
    }
  }
  CHECK_THROWS_AS(checkWeightStationary(broken), ValidationError);

  for (const auto &l : m.layers) {
    CHECK(l.buffers.weights == Shape{m.target.cols_m, m.target.rows_n});
    CHECK(l.buffers.input == Shape{1, m.target.rows_n});
    CHECK(l.buffers.output == Shape{1, m.target.cols_m});
  }
}

TEST_CASE("empty graph lowers to an empty trace") {
  Graph g;
  g.inputs.push_back({"x", {{4}, DType::Int, {0.1, 8, true}}});
  g.outputs = {"x"};
  const auto m = compileModel(g, CimTarget{});
  CHECK(m.trace.empty());
  CHECK(m.layers.empty());
  CHECK(m.predictedLatency() == Micros{});
  Rng rng(1);
  const auto in = randomInputs(g, rng);
  const auto run = runInference(m, in);
  CHECK(run.latency == Micros{});
  CHECK(run.outputs.at("x") == in.at("x"));
}

TEST_CASE("toy models agree with the cost model and the interpreter") {
  Rng rng(2026);
  for (const auto &target : {CimTarget{}, oddTarget()}) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto mlp = makeToyMlp(randomConfig(toyMlpLayerIds(), rng), rng.nextU64());
      checkAgainstCostModel(compileModel(mlp, target), mlp, randomInputs(mlp, rng));
      const auto cnn = makeToyCnn(randomConfig(toyCnnLayerIds(), rng), rng.nextU64());
      checkAgainstCostModel(compileModel(cnn, target), cnn, randomInputs(cnn, rng));
    }
  }
}

TEST_CASE("random graphs run bit-exactly through the crossbar") {
  Rng rng(99);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CAPTURE(seed);
    const auto g = makeRandomGraph(seed);
    const auto target = seed % 2 ? CimTarget{} : oddTarget();
    const auto m = compileModel(g, target);
    checkAgainstCostModel(m, g, randomInputs(g, rng));
  }
}

TEST_CASE("zero input follows the bias path") {
  const auto g = makeToyMlp(QuantConfig::uniform(toyMlpLayerIds(), 8), 3);
  const auto m = compileModel(g, CimTarget{});
  const auto zero = zeroInputs(g);
  const auto run = runInference(m, zero);
  CHECK(run.outputs == evaluate(m.program, zero));
  const auto all = evaluate(m.program, zero, true);
  const auto *fc1 = m.program.findNode("fc1");
  REQUIRE(fc1->int_bias);
  CHECK(all.at(fc1->output).ints == *fc1->int_bias->data);
  CHECK(runInference(m, zero).outputs == run.outputs);
}

TEST_CASE("trace files round-trip byte for byte") {
  Rng rng(8);
  const auto g = makeToyCnn(randomConfig(toyCnnLayerIds(), rng), 5);
  const auto m = compileModel(g, oddTarget(), json{{"command", "test"}});
  std::ostringstream first;
  writeTrace(m, first);
  std::istringstream in(first.str());
  const auto back = readTrace(in);
  std::ostringstream second;
  writeTrace(back, second);
  CHECK(first.str() == second.str());
  CHECK(back.manifest == m.manifest);
  CHECK(back.trace == m.trace);
  const auto x = randomInputs(g, rng);
  CHECK(runInference(back, x).outputs == runInference(m, x).outputs);

  std::ostringstream again;
  writeTrace(compileModel(g, oddTarget(), json{{"command", "test"}}), again);
  CHECK(again.str() == first.str());

  std::istringstream bad("{\"format\": \"other\"}\n");
  CHECK_THROWS_AS(readTrace(bad), ParseError);
}

TEST_CASE("tampered traces are rejected") {
  Rng rng(4);
  const auto g = makeToyMlp(QuantConfig::uniform(toyMlpLayerIds(), 8), 2);
  const auto m = compileModel(g, CimTarget{});
  const auto x = randomInputs(g, rng);

  auto dropped = m;
  for (auto it = dropped.trace.begin(); it != dropped.trace.end(); ++it) {
    if (it->kind == RecordKind::Mvm) {
      dropped.trace.erase(it);
      break;
    }
  }
  CHECK_THROWS_AS(runInference(dropped, x), ValidationError);

  auto shifted = m;
  for (auto &r : shifted.trace) {
    if (r.kind == RecordKind::HostShiftAdd) {
      r.slice_weights.back() *= 2;
      break;
    }
  }
  CHECK_THROWS_AS(runInference(shifted, x), ValidationError);

  auto wrongShape = x;
  wrongShape.at("x").type.shape = {25};
  wrongShape.at("x").ints.push_back(0);
  CHECK_THROWS_AS(runInference(m, wrongShape), ValidationError);
}

TEST_CASE("accumulator overflow propagates") {
  const int n = 600;
  json j = {{"format", "cimforge-model"},
            {"version", 1},
            {"name", "overflow"},
            {"inputs",
             {{{"name", "x"}, {"shape", {n}}, {"dtype", "int"}, {"scale", 1.0}, {"bits", 16}, {"signed", true}}}},
            {"outputs", {"y"}}};
  j["nodes"] = json::array({
      {{"id", "dq0"}, {"op", "Dequantize"}, {"inputs", {"x"}}, {"output", "xf"}},
      {{"id", "fc"},
       {"op", "Dense"},
       {"inputs", {"xf"}},
       {"output", "h"},
       {"attrs",
        {{"weight",
          {{"shape", {1, n}}, {"scale", 1.0}, {"bits", 8}, {"data", std::vector<int>(n, 127)}}}}}},
      {{"id", "q1"},
       {"op", "Quantize"},
       {"inputs", {"h"}},
       {"output", "hq"},
       {"attrs", {{"quant", {{"scale", 1e6}, {"bits", 8}, {"signed", true}}}}}},
      {{"id", "dq1"}, {"op", "Dequantize"}, {"inputs", {"hq"}}, {"output", "y"}},
  });
  const auto g = parseModel(j);
  const auto m = compileModel(g, CimTarget{});
  ValueMap in;
  in["x"].type = g.inputs[0].type;
  in["x"].ints.assign(n, 32767);
  CHECK_THROWS_AS(evaluate(m.program, in), OverflowError);
  CHECK_THROWS_AS(runInference(m, in), OverflowError);

  in["x"].ints.assign(n, 1);
  CHECK_NOTHROW(runInference(m, in));
}
