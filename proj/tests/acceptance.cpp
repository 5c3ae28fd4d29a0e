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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here and nowhere else.

#include "cimforge/aq/env.h"
#include "cimforge/aq/oracle.h"
#include "cimforge/aq/search.h"
#include "cimforge/aq/toy_qat.h"
#include "cimforge/compiler/interpreter.h"
#include "cimforge/compiler/lowering.h"
#include "cimforge/compiler/model_zoo.h"
#include "cimforge/compiler/passes.h"
#include "cimforge/compiler/runtime.h"
#include "cimforge/cost_model.h"
#include "cimforge/quant_config.h"
#include "cimforge/rng.h"
#include "cimforge/target.h"
#include "cimforge/xbar_sim.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

using namespace cimforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kMvmCases = 1764;
constexpr double kMvmSeconds = 60.0;
constexpr int kConfigsPerModel = 20;
constexpr int kRandomGraphs = 50;
constexpr double kMaxOutputSteps = 1.0;
constexpr int kConvergenceEpisodes = 300;
constexpr double kConvergenceFraction = 0.95;
constexpr int kConvergenceSeedsRequired = 2;
constexpr double kConvergenceSeconds = 600.0;
constexpr int kSoundnessEpisodes = 600;
constexpr double kRewardTolerance = 1e-12;
constexpr double kContinuityTolerance = 1e-7;
constexpr double kQatPoints = 2.0;
constexpr double kScoreTolerance = 1e-3;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double secondsSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> idsOf(const std::vector<cost::LayerDesc> &layers) {
  std::vector<std::string> ids;
  for (const auto &l : layers) {
    ids.push_back(l.id);
  }
  return ids;
}

// --------------------------------------------------------------------------

Verdict bitExactMvm() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1);
  const std::pair<std::int64_t, std::int64_t> dims[] = {{8, 8}, {17, 17}, {256, 256}};
  const int cells[] = {1, 2, 4};
  const int dacs[] = {1, 2};
  int cases = 0;
  int mismatches = 0;
  // Every (w_bit, a_bit, r_cell, r_dac, dims) combination at least twice.
  while (cases < kMvmCases) {
    for (int wBit = 2; wBit <= 8; ++wBit) {
      for (int aBit = 2; aBit <= 8; ++aBit) {
        for (int rCell : cells) {
          for (int rDac : dacs) {
            for (const auto &[rows, cols] : dims) {
              CimTarget t;
              t.rows_n = rows;
              t.cols_m = cols;
              t.r_cell = rCell;
              t.r_dac = rDac;
              const auto n = rng.uniformInt(1, 64);
              const auto m = rng.uniformInt(1, 64);
              const auto wMax = (std::int64_t{1} << (wBit - 1)) - 1;
              xbar::IntMatrix w(n, m);
              for (auto &v : w.values) {
                v = static_cast<std::int32_t>(rng.uniformInt(-wMax, wMax));
              }
              const bool aSigned = rng.uniform() < 0.5;
              const auto hi = aSigned ? (std::int64_t{1} << (aBit - 1)) - 1
                                      : (std::int64_t{1} << aBit) - 1;
              std::vector<std::int32_t> x(static_cast<std::size_t>(n));
              for (auto &v : x) {
                v = static_cast<std::int32_t>(rng.uniformInt(aSigned ? -hi : 0, hi));
              }
              const auto got = xbar::slicedMvm(w, x, wBit, aBit, aSigned, t);
              for (std::int64_t k = 0; k < m; ++k) {
                std::int64_t want = 0;
                for (std::int64_t j = 0; j < n; ++j) {
                  want += std::int64_t{w.at(j, k)} * x[static_cast<std::size_t>(j)];
                }
                if (got[static_cast<std::size_t>(k)] != want) {
                  ++mismatches;
                  break;
                }
              }
              ++cases;
            }
          }
        }
      }
    }
  }
  const double secs = secondsSince(t0);
  return {mismatches == 0 && cases >= 1000 && secs < kMvmSeconds,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " +
              fmt(secs, 3) + " s (limit " + fmt(kMvmSeconds) + " s)"};
}

Verdict costHandCases() {
  CimTarget t;
  t.b_min = 1;
  CimTarget r2 = t;
  r2.r_cell = 2;
  std::vector<std::string> misses;
  auto expect = [&](const std::string &what, std::uint64_t got, std::uint64_t want) {
    if (got != want) {
      misses.push_back(what + "=" + std::to_string(got) + " want " + std::to_string(want));
    }
  };
  expect("n_write(64x128,w8,r4)", cost::nWrite(cost::denseLayer("a", 64, 128), 8, t), 1);
  expect("n_write(512x300,w6,r2)", cost::nWrite(cost::denseLayer("b", 512, 300), 6, r2), 24);
  expect("n_write(M/2xN,w=r_cell)", cost::nWrite(cost::denseLayer("c", 128, 256), 4, t), 1);
  const auto dense = cost::denseLayer("d", 64, 128);
  expect("n_mvm(dense,a8)", cost::nMvm(dense, 8, 8, t), 8);
  expect("n_mvm(a1)", cost::nMvm(dense, 8, 1, t), 1);
  const auto full = cost::nMvm(dense, 8, 8, t);
  const auto half = cost::nMvm(dense, 8, 4, t);
  expect("2*n_mvm(a4)", 2 * half, full);
  const auto lat = cost::totalLatency({dense}, QuantConfig::uniform({"d"}, 8), CimTarget{});
  if (lat != Micros::parse("67.2")) {
    misses.push_back("latency=" + lat.toString() + " want 67.2");
  }
  std::string detail = "6 count cases and the 67.2 us latency";
  for (const auto &m : misses) {
    detail += "; " + m;
  }
  return {misses.empty(), detail};
}

QuantConfig randomConfig(const std::vector<std::string> &ids, Rng &rng) {
  QuantConfig c;
  for (const auto &id : ids) {
    c.layers.push_back(
        {id, static_cast<int>(rng.uniformInt(2, 8)), static_cast<int>(rng.uniformInt(2, 8))});
  }
  return c;
}

Verdict traceCostAgreement() {
  const CimTarget target;
  Rng rng(3);
  int compiled = 0;
  int layerMismatches = 0;
  int latencyMismatches = 0;
  using Factory = std::function<compiler::Graph(const QuantConfig &, std::uint64_t)>;
  const std::vector<std::pair<std::vector<std::string>, Factory>> models = {
      {compiler::toyCnnLayerIds(), compiler::makeToyCnn},
      {compiler::toyMlpLayerIds(), compiler::makeToyMlp}};
  for (const auto &[ids, make] : models) {
    for (int i = 0; i < kConfigsPerModel; ++i) {
      const auto g = make(randomConfig(ids, rng), rng.nextU64());
      const auto layers = compiler::extractLayers(g);
      const auto config = compiler::extractConfig(g);
      const auto m = compiler::compileModel(g, target);
      const auto run = compiler::runInference(m, compiler::randomInputs(g, rng));
      for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto &l = layers[k];
        const auto *bits = config.find(l.id);
        const auto rep = static_cast<std::uint64_t>(l.r_repeat);
        const auto w = cost::nWrite(l, bits->w_bit, target) * rep;
        const auto v = cost::nMvm(l, bits->w_bit, bits->a_bit, target) * rep;
        const auto counts = compiler::countRecords(m.trace, l.id);
        const auto &measured = run.layers.at(k);
        if (measured.id != l.id || counts.writes != w || counts.mvms != v ||
            measured.writes != w || measured.mvms != v) {
          ++layerMismatches;
        }
      }
      if (run.latency != cost::totalLatency(layers, config, target)) {
        ++latencyMismatches;
      }
      ++compiled;
    }
  }
  return {compiled == 2 * kConfigsPerModel && layerMismatches == 0 && latencyMismatches == 0,
          std::to_string(compiled) + " compilations (6-layer CNN, 4-layer MLP), " +
              std::to_string(layerMismatches) + " layer count mismatches, " +
              std::to_string(latencyMismatches) + " latency mismatches"};
}

/// Largest output difference in units of the final output's quantization
/// step.
double stepsApart(const compiler::Graph &g, const compiler::ValueMap &a,
                  const compiler::ValueMap &b) {
  const auto types = g.inferTypes();
  double worst = 0.0;
  for (const auto &name : g.outputs) {
    const auto *dq = g.producer(name);
    const double step = types.at(dq->inputs.at(0)).quant.scale;
    const auto &va = a.at(name).floats;
    const auto &vb = b.at(name).floats;
    if (va.size() != vb.size()) {
      return INFINITY;
    }
    for (std::size_t i = 0; i < va.size(); ++i) {
      worst = std::max(worst, std::abs(va[i] - vb[i]) / step);
    }
  }
  return worst;
}

Verdict compilerSemantics() {
  const CimTarget target;
  Rng rng(4);
  int traceMismatches = 0;
  int notIdempotent = 0;
  double worstSteps = 0.0;
  for (int seed = 0; seed < kRandomGraphs; ++seed) {
    const auto g = compiler::makeRandomGraph(static_cast<std::uint64_t>(seed));
    const auto f = compiler::fq2iPass(g);
    const auto fused = compiler::qnnFusePass(f);
    if (compiler::fq2iPass(f) != f || compiler::qnnFusePass(fused) != fused) {
      ++notIdempotent;
    }
    const auto m = compiler::compileModel(g, target);
    const auto in = compiler::randomInputs(g, rng);
    if (compiler::runInference(m, in).outputs != compiler::evaluate(m.program, in)) {
      ++traceMismatches;
    }
    const auto ref = compiler::evaluate(g, in);
    worstSteps = std::max({worstSteps, stepsApart(g, ref, compiler::evaluate(f, in)),
                           stepsApart(g, ref, compiler::evaluate(fused, in))});
  }
  return {traceMismatches == 0 && notIdempotent == 0 && worstSteps <= kMaxOutputSteps,
          std::to_string(kRandomGraphs) + " graphs, " + std::to_string(traceMismatches) +
              " trace/interpreter mismatches, " + std::to_string(notIdempotent) +
              " non-idempotent, worst deviation " + fmt(worstSteps) + " steps (limit " +
              fmt(kMaxOutputSteps) + ")"};
}

// --------------------------------------------------------------------------

/// Exhaustive optimum for one oracle seed, reused from cacheDir when the
/// stored problem matches exactly.
aq::Optimum cachedOptimum(const std::vector<cost::LayerDesc> &layers,
                          const aq::SyntheticOracle &oracle, const CimTarget &target,
                          double accLoss, const fs::path &cacheDir, std::uint64_t seed) {
  json layerJson = json::array();
  for (const auto &l : layers) {
    layerJson.push_back({l.id, l.m_l, l.n_l, l.v_l, l.r_repeat});
  }
  const json key = {{"layers", layerJson},
                    {"target", targetToJson(target)},
                    {"c_w", oracle.weightCoefficients()},
                    {"c_a", oracle.activationCoefficients()},
                    {"acc_8b", oracle.acc8b()},
                    {"acc_loss", accLoss}};
  const auto path = cacheDir / ("optimum_seed" + std::to_string(seed) + ".json");
  if (std::ifstream in(path); in) {
    try {
      const auto cached = json::parse(in);
      if (cached.at("key") == key) {
        aq::Optimum o;
        o.config = quantConfigFromJson(cached.at("config"));
        o.reward = cached.at("reward").get<double>();
        o.acc_q = cached.at("acc_q").get<double>();
        o.latency = Micros::parse(cached.at("latency_us").get<std::string>());
        o.evaluated = cached.at("evaluated").get<std::uint64_t>();
        return o;
      }
    } catch (const std::exception &) {
    }
  }
  const auto o = aq::enumerateOptimum(layers, oracle, target, ConstraintMode::None, accLoss);
  fs::create_directories(cacheDir);
  std::ofstream(path) << json{{"key", key},
                              {"config", quantConfigToJson(o.config)},
                              {"reward", o.reward},
                              {"acc_q", o.acc_q},
                              {"latency_us", o.latency.toString()},
                              {"evaluated", o.evaluated}}
                             .dump(2)
                      << '\n';
  return o;
}

Verdict rlConvergence(const fs::path &cacheDir) {
  const auto t0 = std::chrono::steady_clock::now();
  aq::SearchProblem problem;
  problem.layers = aq::syntheticBenchmarkLayers();
  const auto ids = idsOf(problem.layers);
  const std::uint64_t seeds[] = {0, 1, 2};

  std::vector<aq::Optimum> optima;
  for (auto seed : seeds) {
    const aq::SyntheticOracle oracle(ids, seed);
    optima.push_back(
        cachedOptimum(problem.layers, oracle, problem.target, problem.acc_loss, cacheDir, seed));
  }

  int reached = 0;
  std::string detail;
  for (std::size_t i = 0; i < std::size(seeds); ++i) {
    aq::SyntheticOracle oracle(ids, seeds[i]);
    aq::SearchOptions options;
    options.episodes = kConvergenceEpisodes;
    options.seed = seeds[i];
    const auto result = aq::search(problem, oracle, options);
    const double fraction = result.best_reward / optima[i].reward;
    reached += fraction >= kConvergenceFraction ? 1 : 0;
    detail += "seed " + std::to_string(seeds[i]) + ": " + fmt(result.best_reward) + "/" +
              fmt(optima[i].reward) + " = " + fmt(fraction, 4) + "; ";
  }
  const double secs = secondsSince(t0);
  detail += std::to_string(reached) + "/3 seeds >= " + fmt(kConvergenceFraction) + " (need " +
            std::to_string(kConvergenceSeedsRequired) + "), " + fmt(secs, 3) + " s";
  return {reached >= kConvergenceSeedsRequired && secs < kConvergenceSeconds, detail};
}

Verdict constraintSoundness() {
  aq::SearchProblem problem;
  problem.layers = aq::syntheticBenchmarkLayers();
  const auto ids = idsOf(problem.layers);
  int violations = 0;
  int checked = 0;
  for (auto mode : {ConstraintMode::None, ConstraintMode::InputOutput, ConstraintMode::Weight,
                    ConstraintMode::Both}) {
    problem.mode = mode;
    aq::SyntheticOracle oracle(ids, 0);
    aq::SearchOptions options;
    options.episodes = kSoundnessEpisodes;
    const auto result = aq::search(problem, oracle, options);
    auto configs = std::vector<QuantConfig>{result.best};
    for (const auto &e : result.history) {
      configs.push_back(e.config);
    }
    for (const auto &c : configs) {
      ++checked;
      if (c.mode != mode || c.violation(problem.target)) {
        ++violations;
      }
    }
  }
  return {violations == 0 && checked == 4 * (kSoundnessEpisodes + 1),
          std::to_string(checked) + " configs over 4 modes x " +
              std::to_string(kSoundnessEpisodes) + " episodes, " + std::to_string(violations) +
              " violations"};
}

Verdict rewardExamples() {
  const auto t = Micros::fromInteger(100);
  struct Case {
    const char *what;
    double got;
    double want;
    double tolerance;
  };
  const Case cases[] = {
      {"R(65, 70, T, T)", aq::reward(65.0, 70.0, t, t), -50.0, kRewardTolerance},
      {"R(acc_t, acc_t, T, T)", aq::reward(70.0, 70.0, t, t), 0.0, kRewardTolerance},
      {"R(72, 70, 2T, T)", aq::reward(72.0, 70.0, t * 2, t), 100.2, kRewardTolerance},
      {"R(acc_t - 1e-9, acc_t, T, T)", aq::reward(70.0 - 1e-9, 70.0, t, t), 0.0,
       kContinuityTolerance},
  };
  bool ok = true;
  std::string detail;
  for (const auto &c : cases) {
    ok = ok && std::abs(c.got - c.want) <= c.tolerance * std::max(1.0, std::abs(c.want));
    detail += std::string(c.what) + " = " + fmt(c.got, 17) + "; ";
  }
  return {ok, detail + "tolerance " + fmt(kRewardTolerance) + " relative"};
}

Verdict toyQatSanity() {
  const std::vector<std::string> ids = {"fc1", "fc2", "fc3"};
  aq::ToyQatOracle oracle(ids, 0);
  const double fp = oracle.floatAccuracy();
  const auto all8 = QuantConfig::uniform(ids, 8);
  const double q8 = oracle.evaluate(all8);
  QuantConfig mixed = all8;
  mixed.layers[0].w_bit = 3;
  mixed.layers[1].a_bit = 4;
  const double first = oracle.evaluate(mixed);
  aq::ToyQatOracle fresh(ids, 0);
  const bool identical = oracle.evaluate(mixed) == first && fresh.evaluate(mixed) == first &&
                         fresh.evaluate(all8) == q8 && fresh.floatAccuracy() == fp;
  const double gap = std::abs(q8 - fp);
  return {gap <= kQatPoints && identical,
          "float " + fmt(fp) + "%, all-8-bit " + fmt(q8) + "%, gap " + fmt(gap) + " pp (limit " +
              fmt(kQatPoints) + "), reruns " + (identical ? "bit-identical" : "differ")};
}

Verdict activationVersusWeightBits() {
  CimTarget target;
  target.r_dac = 1;
  std::vector<cost::LayerDesc> layers = aq::toyQatLayers({"fc1", "fc2", "fc3"});
  for (auto l : compiler::extractLayers(
           compiler::makeToyCnn(QuantConfig::uniform(compiler::toyCnnLayerIds(), 8), 0))) {
    l.id = "cnn." + l.id;
    layers.push_back(l);
  }
  const auto lut = cost::buildLut(layers, target);
  auto minActivation = std::numeric_limits<std::int64_t>::max();
  std::int64_t maxWeightInBand = 0;
  int activationSteps = 0;
  int weightSteps = 0;
  bool ok = true;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (int w = target.b_min; w <= target.b_max; ++w) {
      for (int a = target.b_min; a <= target.b_max; ++a) {
        if (a > target.b_min) {
          const auto d = lut.at(l, w, a).ticks() - lut.at(l, w, a - 1).ticks();
          ok = ok && d > 0;
          minActivation = std::min(minActivation, d);
          ++activationSteps;
        }
        if (w > target.b_min &&
            xbar::weightSliceCount(w, target.r_cell) == xbar::weightSliceCount(w - 1, target.r_cell)) {
          const auto d = lut.at(l, w, a).ticks() - lut.at(l, w - 1, a).ticks();
          maxWeightInBand = std::max(maxWeightInBand, d);
          ++weightSteps;
        }
      }
    }
  }
  ok = ok && minActivation > maxWeightInBand && activationSteps > 0 && weightSteps > 0;
  return {ok, std::to_string(layers.size()) + " toy layers, smallest saving per activation bit " +
                  Micros::fromTicks(minActivation).toString() + " us over " + std::to_string(activationSteps) +
                  " steps, largest saving per weight bit within a slice band " +
                  Micros::fromTicks(maxWeightInBand).toString() + " us over " + std::to_string(weightSteps) +
                  " steps"};
}

Verdict salScore() {
  const double speedup = 2.37;
  const double loss = 0.812;
  const double acc8b = 70.0;
  const auto s = cost::speedupAndScore(speedup, 1.0, acc8b, acc8b - loss);
  const double want = 2.924;
  const double diff = std::abs(s.s_al - want);
  return {diff <= kScoreTolerance, "S/AL " + fmt(s.s_al, 8) + " vs " + fmt(want) + ", |diff| " +
                                       fmt(diff, 4) + " (limit " + fmt(kScoreTolerance) + ")"};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"cimforge acceptance suite"};
  std::vector<int> selected;
  std::string cacheDir = "acceptance_cache";
  app.add_option("--criterion", selected, "Criteria to run (default: all)")
      ->check(CLI::Range(1, 10));
  app.add_option("--cache-dir", cacheDir, "Where the enumerated optima are cached")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) {
    for (int i = 1; i <= 10; ++i) {
      selected.push_back(i);
    }
  }

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"bit-exact sliced MVM", bitExactMvm},
      {"cost-model hand cases", costHandCases},
      {"trace/cost agreement", traceCostAgreement},
      {"compiler semantics", compilerSemantics},
      {"RL convergence", [&] { return rlConvergence(cacheDir); }},
      {"constraint soundness", constraintSoundness},
      {"reward function", rewardExamples},
      {"toy QAT sanity", toyQatSanity},
      {"activation vs weight bit savings", activationVersusWeightBits},
      {"S/AL score", salScore},
  };

  bool allPass = true;
  for (int n : selected) {
    const auto &[name, run] = criteria.at(static_cast<std::size_t>(n - 1));
    Verdict v;
    try {
      v = run();
    } catch (const std::exception &e) {
      v = {false, std::string("error: ") + e.what()};
    }
    allPass = allPass && v.pass;
    std::cout << "C" << n << " " << (v.pass ? "PASS" : "FAIL") << " " << name << ": " << v.detail
              << std::endl;
  }
  return allPass ? 0 : 1;
}
