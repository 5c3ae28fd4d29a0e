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

#include "cimforge/aq/search.h"

#include "cimforge/aq/env.h"
#include "cimforge/aq/toy_qat.h"
#include "cimforge/error.h"

#include <cmath>

namespace cimforge::aq {

Baseline makeBaseline(const SearchProblem &problem, AccuracyOracle &oracle) {
  if (problem.layers.empty()) {
    throw ValidationError("search needs at least one crossbar layer");
  }
  checkModeSatisfiable(problem.mode, problem.target);
  Baseline b;
  b.acc8b = oracle.baselineAccuracy();
  b.acc_t = accuracyTarget(b.acc8b, problem.acc_loss);
  std::vector<std::string> ids;
  for (const auto &l : problem.layers) {
    ids.push_back(l.id);
  }
  b.t8b = cost::totalLatency(problem.layers,
                             QuantConfig::uniform(ids, problem.target.b_max), problem.target);
  return b;
}

EpisodeResult runEpisode(Agent &agent, const SearchProblem &problem, AccuracyOracle &oracle,
                         const Baseline &baseline, double sigma) {
  const auto &layers = problem.layers;
  const auto base = layerObservations(layers);
  EpisodeResult ep;
  ep.config.mode = problem.mode;
  Action previous{0.0, 0.0};
  std::vector<Observation> obs;
  std::vector<Action> actions;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto o = withPreviousAction(base[k], previous);
    const auto a = agent.act(o, sigma);
    LayerBits bits;
    bits.layer_id = layers[k].id;
    bits.w_bit = actionToBits(a[0], k, layers.size(), BitRole::Weight, problem.mode,
                              problem.target);
    bits.a_bit = actionToBits(a[1], k, layers.size(), BitRole::Activation, problem.mode,
                              problem.target);
    ep.config.layers.push_back(bits);
    obs.push_back(o);
    actions.push_back(a);
    previous = a;
  }
  ep.config.validate(problem.target);
  ep.latency = cost::totalLatency(layers, ep.config, problem.target);
  ep.acc_q = oracle.evaluate(ep.config);
  ep.reward = reward(ep.acc_q, baseline.acc_t, baseline.t8b, ep.latency);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    ReplayTuple t;
    t.obs = obs[k];
    t.action = actions[k];
    t.reward = ep.reward;
    t.terminal = k + 1 == layers.size();
    t.next = t.terminal ? obs[k] : obs[k + 1];
    ep.tuples.push_back(t);
    agent.remember(t);
  }
  return ep;
}

SearchResult search(const SearchProblem &problem, AccuracyOracle &oracle,
                    const SearchOptions &options) {
  if (options.episodes < 0) {
    throw ValidationError("episodes must be ≥ 0");
  }
  SearchResult result;
  result.oracle = oracle.name();
  result.baseline = makeBaseline(problem, oracle);
  Agent agent(options.seed, options.ddpg);
  double sigma = options.sigma0;
  for (int e = 0; e < options.episodes; ++e) {
    auto ep = runEpisode(agent, problem, oracle, result.baseline, sigma);
    if (e == 0 || ep.reward > result.best_reward) {
      result.best = ep.config;
      result.best_reward = ep.reward;
      result.best_acc_q = ep.acc_q;
      result.best_latency = ep.latency;
      result.best_episode = e;
    }
    result.history.push_back({ep.config, ep.reward, ep.acc_q, ep.latency, sigma});
    if (agent.buffer().size() >= options.ddpg.batch_size) {
      for (int s = 0; s < options.train_steps; ++s) {
        agent.trainStep();
      }
    }
    sigma *= options.sigma_decay;
  }
  return result;
}

nlohmann::json searchReportJson(const SearchResult &result, const SearchProblem &problem) {
  using nlohmann::json;
  const auto score = cost::speedupAndScore(result.baseline.t8b, result.best_latency,
                                           result.baseline.acc8b, result.best_acc_q);
  json history = json::array();
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto &h = result.history[e];
    json bits = json::array();
    for (const auto &l : h.config.layers) {
      bits.push_back({l.w_bit, l.a_bit});
    }
    history.push_back({{"episode", e},
                       {"reward", h.reward},
                       {"acc_q", h.acc_q},
                       {"t_q_us", h.latency.toString()},
                       {"sigma", h.sigma},
                       {"bits", bits}});
  }
  json best = quantConfigToJson(result.best);
  return {{"oracle", result.oracle},
          {"constraint_mode", std::string(constraintModeName(problem.mode))},
          {"acc_loss", problem.acc_loss},
          {"episodes", result.history.size()},
          {"baseline",
           {{"acc_8b", result.baseline.acc8b},
            {"acc_t", result.baseline.acc_t},
            {"t_8b_us", result.baseline.t8b.toString()}}},
          {"best",
           {{"episode", result.best_episode},
            {"reward", result.best_reward},
            {"acc_q", result.best_acc_q},
            {"t_q_us", result.best_latency.toString()},
            {"speedup", score.speedup},
            {"accuracy_loss", result.baseline.acc8b - result.best_acc_q},
            {"s_al", score.s_al},
            {"config", best}}},
          {"history", history}};
}

std::vector<cost::LayerDesc> syntheticBenchmarkLayers() {
  return {cost::convLayer("conv1", {3, 16, 3, 3, 32, 32}),
          cost::convLayer("conv2", {16, 32, 3, 3, 16, 16}),
          cost::convLayer("conv3", {32, 64, 3, 3, 8, 8}),
          cost::denseLayer("fc1", 128, 1024),
          cost::denseLayer("fc2", 10, 128)};
}

std::vector<cost::LayerDesc> toyQatLayers(const std::vector<std::string> &ids) {
  const ToyQatOptions shape;
  std::vector<cost::LayerDesc> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto in = i == 0 ? shape.features : shape.hidden;
    const auto o = i + 1 == ids.size() ? shape.classes : shape.hidden;
    out.push_back(cost::denseLayer(ids[i], o, in));
  }
  return out;
}

} // namespace cimforge::aq
