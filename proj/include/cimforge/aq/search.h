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

#include "cimforge/aq/agent.h"
#include "cimforge/aq/oracle.h"
#include "cimforge/cost_model.h"
#include "cimforge/micros.h"
#include "cimforge/quant_config.h"
#include "cimforge/target.h"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace cimforge::aq {

struct SearchProblem {
  std::vector<cost::LayerDesc> layers;
  CimTarget target;
  ConstraintMode mode = ConstraintMode::None;
  /// Tolerated accuracy loss in percent.
  double acc_loss = 5.0;
};

/// Reference quantities shared by every episode of a search.
struct Baseline {
  double acc8b = 0.0;
  double acc_t = 0.0;
  Micros t8b;
};
Baseline makeBaseline(const SearchProblem &problem, AccuracyOracle &oracle);

struct EpisodeResult {
  QuantConfig config;
  double reward = 0.0;
  double acc_q = 0.0;
  Micros latency;
  std::vector<ReplayTuple> tuples;
};

/// One pass over the layers with exploration noise sigma. The config's
/// latency comes from cost::totalLatency; the single reward is stored in
/// every tuple, and the tuples are appended to the agent's buffer.
EpisodeResult runEpisode(Agent &agent, const SearchProblem &problem, AccuracyOracle &oracle,
                         const Baseline &baseline, double sigma);

struct SearchOptions {
  int episodes = 600;
  std::uint64_t seed = 0;
  double sigma0 = 0.5;
  double sigma_decay = 0.99;
  /// Agent updates after each episode once the buffer holds a batch.
  int train_steps = 10;
  DdpgOptions ddpg;
};

struct EpisodeSummary {
  QuantConfig config;
  double reward = 0.0;
  double acc_q = 0.0;
  Micros latency;
  double sigma = 0.0;
};

struct SearchResult {
  QuantConfig best;
  double best_reward = 0.0;
  double best_acc_q = 0.0;
  Micros best_latency;
  int best_episode = 0;
  Baseline baseline;
  std::vector<EpisodeSummary> history;
  std::string oracle;
};

/// Runs the agent for options.episodes episodes; the result holds the
/// highest-reward config (earliest on ties) and every episode's outcome.
/// Fully determined by the seed and the inputs.
SearchResult search(const SearchProblem &problem, AccuracyOracle &oracle,
                    const SearchOptions &options);

/// Search report: best config with speedup, accuracy loss and S/AL score,
/// plus per-episode reward, acc_q and T_q.
nlohmann::json searchReportJson(const SearchResult &result, const SearchProblem &problem);

/// Five crossbar layers used as the synthetic-oracle benchmark: three
/// convolutions and two Dense layers.
std::vector<cost::LayerDesc> syntheticBenchmarkLayers();

/// Dense layers of the toy QAT network (16 -> 32 -> ... -> 8) with one
/// layer per id.
std::vector<cost::LayerDesc> toyQatLayers(const std::vector<std::string> &ids);

} // namespace cimforge::aq
