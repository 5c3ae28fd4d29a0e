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

#include "cli.h"

#include "cimforge/aq/oracle.h"
#include "cimforge/aq/search.h"
#include "cimforge/aq/toy_qat.h"
#include "cimforge/compiler/lowering.h"
#include "cimforge/compiler/model_io.h"
#include "cimforge/compiler/model_zoo.h"
#include "cimforge/compiler/passes.h"
#include "cimforge/compiler/runtime.h"
#include "cimforge/cost_model.h"
#include "cimforge/error.h"
#include "cimforge/quant_config.h"
#include "cimforge/rng.h"
#include "cimforge/target.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#ifndef CIMFORGE_VERSION_STRING
#define CIMFORGE_VERSION_STRING "0.0.0"
#endif

namespace cimforge::cli {

namespace {

using nlohmann::json;

/// Bad command-line values that CLI11 cannot catch on its own.
class UsageError : public Error {
public:
  using Error::Error;
};

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  std::string target;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::vector<std::string> outputs;

  json toJson() const {
    return {{"command", command},
            {"input_paths", inputs},
            {"target_path", target.empty() ? json() : json(target)},
            {"seed", seed ? json(*seed) : json()},
            {"constraint_mode", mode ? json(*mode) : json()},
            {"output_paths", outputs},
            {"version", CIMFORGE_VERSION_STRING}};
  }
};

std::uint64_t parseSeed(const std::string &text, const std::string &what) {
  std::uint64_t v = 0;
  const auto *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw UsageError(what + ": '" + text + "' is not a nonnegative integer");
  }
  return v;
}

/// --seed when given, else CIMFORGE_SEED, else 0.
std::uint64_t resolveSeed(const CLI::Option *opt, const std::string &flag) {
  if (opt->count() > 0) {
    return parseSeed(flag, "--seed");
  }
  if (const char *env = std::getenv("CIMFORGE_SEED")) {
    return parseSeed(env, "CIMFORGE_SEED");
  }
  return 0;
}

void writeJson(const json &j, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path);
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw Error("failed writing " + path);
  }
}

std::vector<std::string> layerIds(const std::vector<cost::LayerDesc> &layers) {
  std::vector<std::string> ids;
  for (const auto &l : layers) {
    ids.push_back(l.id);
  }
  return ids;
}

struct CompileArgs {
  std::string model, target, out, report;
};

int cmdCompile(const CompileArgs &a, std::ostream &out) {
  const auto report = a.report.empty() ? a.out + ".report.json" : a.report;
  Manifest man{"compile", {a.model}, a.target, std::nullopt, std::nullopt, {a.out, report}};
  const auto target = loadTarget(a.target);
  const auto graph = compiler::loadModel(a.model);
  const auto compiled = compiler::compileModel(graph, target, man.toJson());
  compiler::saveTrace(compiled, a.out);

  json layers = json::array();
  for (const auto &l : compiled.layers) {
    const auto counts = compiler::countRecords(compiled.trace, l.id);
    layers.push_back({{"id", l.id},
                      {"w_bit", l.w_bit},
                      {"a_bit", l.a_bit},
                      {"m_l", l.desc.m_l},
                      {"n_l", l.desc.n_l},
                      {"v_l", l.desc.v_l},
                      {"r_repeat", l.desc.r_repeat},
                      {"n_write", counts.writes},
                      {"n_mvm", counts.mvms},
                      {"predicted_latency_us", l.predicted_latency.toString()}});
  }
  writeJson({{"manifest", man.toJson()},
             {"model", compiled.program.name},
             {"layers", layers},
             {"predicted_latency_us", compiled.predictedLatency().toString()}},
            report);
  out << "layers: " << compiled.layers.size() << '\n'
      << "records: " << compiled.trace.size() << '\n'
      << "predicted_latency_us: " << compiled.predictedLatency().toString() << '\n';
  return kExitOk;
}

struct RunArgs {
  std::string trace, input, out;
};

int cmdRun(const RunArgs &a, std::ostream &out) {
  Manifest man{"run", {a.trace, a.input}, "", std::nullopt, std::nullopt, {a.out}};
  const auto compiled = compiler::loadTrace(a.trace);
  const auto inputs = compiler::loadValues(a.input);
  const auto result = compiler::runInference(compiled, inputs);
  const auto predicted = compiled.predictedLatency();
  if (result.latency != predicted) {
    throw Error("measured latency " + result.latency.toString() + " us differs from predicted " +
                predicted.toString() + " us");
  }
  auto doc = compiler::valuesToJson(result.outputs);
  doc["manifest"] = man.toJson();
  doc["latency_us"] = result.latency.toString();
  doc["predicted_latency_us"] = predicted.toString();
  doc["writes"] = result.writes;
  doc["mvms"] = result.mvms;
  writeJson(doc, a.out);
  out << "writes: " << result.writes << '\n'
      << "mvms: " << result.mvms << '\n'
      << "latency_us: " << result.latency.toString() << '\n';
  return kExitOk;
}

struct CostArgs {
  std::string model, target, lut;
};

int cmdCost(const CostArgs &a, std::ostream &out) {
  Manifest man{"cost", {a.model}, a.target, std::nullopt, std::nullopt, {}};
  if (!a.lut.empty()) {
    man.outputs.push_back(a.lut);
  }
  const auto target = loadTarget(a.target);
  const auto layers = compiler::extractLayers(compiler::loadModel(a.model));
  const auto ids = layerIds(layers);
  const auto t8b = cost::totalLatency(layers, QuantConfig::uniform(ids, 8), target);
  if (!a.lut.empty()) {
    std::ofstream csv(a.lut);
    if (!csv) {
      throw Error("cannot write " + a.lut);
    }
    csv << "# manifest: " << man.toJson().dump() << '\n';
    cost::writeLutCsv(cost::buildLut(layers, target), csv);
    if (!csv) {
      throw Error("failed writing " + a.lut);
    }
  }
  out << "layers: " << layers.size() << '\n' << "t_8b_us: " << t8b.toString() << '\n';
  return kExitOk;
}

struct SearchArgs {
  std::string model, target, out, constraints = "none", oracle = "synthetic", seed;
  int episodes = 600;
  double acc_loss = 5.0;
};

int cmdSearch(const SearchArgs &a, std::uint64_t seed, std::ostream &out) {
  if (a.episodes < 1) {
    throw UsageError("--episodes must be at least 1");
  }
  aq::SearchProblem problem;
  problem.mode = parseConstraintMode(a.constraints);
  problem.acc_loss = a.acc_loss;
  Manifest man{"search", {a.model}, a.target, seed, std::string(constraintModeName(problem.mode)),
               {a.out}};
  problem.target = loadTarget(a.target);
  problem.layers = compiler::extractLayers(compiler::loadModel(a.model));

  std::unique_ptr<aq::AccuracyOracle> oracle;
  if (a.oracle == "synthetic") {
    oracle = std::make_unique<aq::SyntheticOracle>(layerIds(problem.layers), seed);
  } else {
    oracle = std::make_unique<aq::ToyQatOracle>(layerIds(problem.layers), seed);
  }
  aq::SearchOptions options;
  options.episodes = a.episodes;
  options.seed = seed;
  const auto result = aq::search(problem, *oracle, options);
  auto report = aq::searchReportJson(result, problem);
  report["manifest"] = man.toJson();
  writeJson(report, a.out);

  const auto &best = report.at("best");
  out << "best_episode: " << result.best_episode << '\n'
      << "best_reward: " << best.at("reward").dump() << '\n'
      << "speedup: " << best.at("speedup").dump() << '\n'
      << "accuracy_loss: " << best.at("accuracy_loss").dump() << '\n'
      << "s_al: " << best.at("s_al").dump() << '\n';
  return kExitOk;
}

struct GenArgs {
  std::string kind, out, config, inputs, seed;
  bool zero = false;
};

const std::map<std::string, std::vector<std::string>> &configurableKinds() {
  static const std::map<std::string, std::vector<std::string>> kinds = {
      {"toy-mlp", compiler::toyMlpLayerIds()}, {"toy-cnn", compiler::toyCnnLayerIds()}};
  return kinds;
}

const std::vector<std::string> kModelKinds = {"toy-mlp",  "toy-cnn",         "two-layer-mlp",
                                              "random",   "cifar-benchmark", "resnet18",
                                              "vgg16",    "vit-b32"};

int cmdGenModel(const GenArgs &a, std::uint64_t seed, std::ostream &out) {
  Manifest man{"gen-model", {}, "", seed, std::nullopt, {a.out}};
  if (!a.config.empty()) {
    man.inputs.push_back(a.config);
  }
  if (!a.inputs.empty()) {
    man.outputs.push_back(a.inputs);
  }
  const auto kind = configurableKinds().find(a.kind);
  QuantConfig config;
  if (!a.config.empty()) {
    if (kind == configurableKinds().end()) {
      throw UsageError("--config applies to toy-mlp and toy-cnn only");
    }
    config = quantConfigFromJson(compiler::readJsonFile(a.config));
  } else if (kind != configurableKinds().end()) {
    config = QuantConfig::uniform(kind->second, 8);
  }

  compiler::Graph g;
  if (a.kind == "toy-mlp") {
    g = compiler::makeToyMlp(config, seed);
  } else if (a.kind == "toy-cnn") {
    g = compiler::makeToyCnn(config, seed);
  } else if (a.kind == "two-layer-mlp") {
    g = compiler::makeTwoLayerMlp(seed);
  } else if (a.kind == "random") {
    g = compiler::makeRandomGraph(seed);
  } else if (a.kind == "cifar-benchmark") {
    g = compiler::makeCifarBenchmarkShape();
  } else if (a.kind == "resnet18") {
    g = compiler::makeResNet18Shape();
  } else if (a.kind == "vgg16") {
    g = compiler::makeVgg16Shape();
  } else {
    g = compiler::makeVitB32Shape();
  }
  auto doc = compiler::modelToJson(g);
  doc["manifest"] = man.toJson();
  writeJson(doc, a.out);

  if (!a.inputs.empty()) {
    Rng rng(seed);
    auto values = a.zero ? compiler::zeroInputs(g) : compiler::randomInputs(g, rng);
    auto tensors = compiler::valuesToJson(values);
    tensors["manifest"] = man.toJson();
    writeJson(tensors, a.inputs);
  }
  out << "model: " << g.name << '\n'
      << "crossbar_layers: " << compiler::extractLayers(g).size() << '\n';
  return kExitOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"cimforge: compiler, cost model and mixed-precision search for RRAM crossbars",
               "cimforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CIMFORGE_VERSION_STRING);

  CompileArgs compile;
  auto *c = app.add_subcommand("compile", "Compile a QDQ model into a device trace");
  c->add_option("--model", compile.model, "Model JSON")->required();
  c->add_option("--target", compile.target, "Target JSON")->required();
  c->add_option("--out", compile.out, "Trace output (JSON Lines)")->required();
  c->add_option("--report", compile.report, "Compile report (default: <out>.report.json)");

  RunArgs runArgs;
  auto *r = app.add_subcommand("run", "Execute a trace on the crossbar simulator");
  r->add_option("--trace", runArgs.trace, "Trace file")->required();
  r->add_option("--input", runArgs.input, "Input tensor file")->required();
  r->add_option("--out", runArgs.out, "Output tensor file")->required();

  CostArgs costArgs;
  auto *k = app.add_subcommand("cost", "Print the 8-bit latency of a model");
  k->add_option("--model", costArgs.model, "Model JSON")->required();
  k->add_option("--target", costArgs.target, "Target JSON")->required();
  k->add_option("--lut", costArgs.lut, "Write the latency lookup table as CSV");

  SearchArgs searchArgs;
  auto *s = app.add_subcommand("search", "Mixed-precision search");
  s->add_option("--model", searchArgs.model, "Model JSON")->required();
  s->add_option("--target", searchArgs.target, "Target JSON")->required();
  s->add_option("--out", searchArgs.out, "Search report JSON")->required();
  s->add_option("--constraints", searchArgs.constraints, "Constraint mode")
      ->check(CLI::IsMember({"none", "io", "weight", "both"}))
      ->capture_default_str();
  s->add_option("--episodes", searchArgs.episodes, "Episodes")->capture_default_str();
  auto *searchSeed = s->add_option("--seed", searchArgs.seed, "Seed (default: $CIMFORGE_SEED or 0)");
  s->add_option("--oracle", searchArgs.oracle, "Accuracy oracle")
      ->check(CLI::IsMember({"synthetic", "toy"}))
      ->capture_default_str();
  s->add_option("--acc-loss", searchArgs.acc_loss, "Tolerated accuracy loss in percent")
      ->capture_default_str();

  GenArgs gen;
  auto *g = app.add_subcommand("gen-model", "Write a built-in model");
  g->add_option("--kind", gen.kind, "Model kind")->required()->check(CLI::IsMember(kModelKinds));
  g->add_option("--out", gen.out, "Model JSON")->required();
  g->add_option("--config", gen.config, "QuantConfig JSON (toy-mlp, toy-cnn)");
  g->add_option("--inputs", gen.inputs, "Also write an input tensor file");
  g->add_flag("--zero", gen.zero, "Inputs are all zero instead of random");
  auto *genSeed = g->add_option("--seed", gen.seed, "Seed (default: $CIMFORGE_SEED or 0)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const auto code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c->parsed()) {
      return cmdCompile(compile, out);
    }
    if (r->parsed()) {
      return cmdRun(runArgs, out);
    }
    if (k->parsed()) {
      return cmdCost(costArgs, out);
    }
    if (s->parsed()) {
      return cmdSearch(searchArgs, resolveSeed(searchSeed, searchArgs.seed), out);
    }
    return cmdGenModel(gen, resolveSeed(genSeed, gen.seed), out);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError &e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

} // namespace cimforge::cli
