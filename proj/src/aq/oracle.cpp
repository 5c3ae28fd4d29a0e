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

#include "cimforge/aq/oracle.h"

#include "cimforge/aq/env.h"
#include "cimforge/error.h"
#include "cimforge/rng.h"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cimforge::aq {

namespace {

constexpr int kReferenceBits = 8;

struct Choice {
  int w = 0;
  int a = 0;
  Micros latency;
  double penalty = 0.0;
};

QuantConfig makeConfig(const std::vector<cost::LayerDesc> &layers, const std::vector<Choice> &c,
                       ConstraintMode mode) {
  QuantConfig q;
  q.mode = mode;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    q.layers.push_back({layers[i].id, c[i].w, c[i].a});
  }
  return q;
}

/// Depth-first product over per-layer choice lists.
template <typename Visit>
void product(const std::vector<std::vector<Choice>> &choices, Visit visit) {
  std::vector<Choice> current(choices.size());
  std::function<void(std::size_t, Micros, double)> rec = [&](std::size_t l, Micros t, double p) {
    if (l == choices.size()) {
      visit(current, t, p);
      return;
    }
    for (const auto &c : choices[l]) {
      current[l] = c;
      rec(l + 1, t + c.latency, p + c.penalty);
    }
  };
  rec(0, Micros{}, 0.0);
}

Optimum search(const std::vector<cost::LayerDesc> &layers, const SyntheticOracle &oracle,
               const CimTarget &target, ConstraintMode mode, double accLoss, bool prune) {
  if (oracle.layerIds().size() != layers.size()) {
    throw ValidationError("oracle and layer list disagree on the layer count");
  }
  checkModeSatisfiable(mode, target);
  Micros t8b;
  for (const auto &l : layers) {
    t8b += cost::layerLatency(l, target.b_max, target.b_max, target);
  }
  std::vector<std::vector<Choice>> choices;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::vector<Choice> all;
    for (auto [w, a] : admissibleBits(i, layers.size(), mode, target)) {
      all.push_back({w, a, cost::layerLatency(layers[i], w, a, target), oracle.penalty(i, w, a)});
    }
    if (prune) {
      std::vector<Choice> kept;
      for (const auto &c : all) {
        const bool dominated = std::any_of(all.begin(), all.end(), [&](const Choice &d) {
          const bool noWorse = d.latency <= c.latency && d.penalty <= c.penalty;
          const bool better = d.latency < c.latency || d.penalty < c.penalty;
          return noWorse && better;
        });
        // Among exact duplicates keep the first.
        const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Choice &d) {
          return d.latency == c.latency && d.penalty == c.penalty;
        });
        if (!dominated && !duplicate) {
          kept.push_back(c);
        }
      }
      all = std::move(kept);
    }
    choices.push_back(std::move(all));
  }

  const double acc8b = oracle.acc8b();
  const double accT = accuracyTarget(acc8b, accLoss);
  Optimum best;
  bool found = false;
  product(choices, [&](const std::vector<Choice> &c, Micros t, double p) {
    ++best.evaluated;
    const double accQ = acc8b - p;
    const double r = reward(accQ, accT, t8b, t);
    if (!found || r > best.reward) {
      found = true;
      best.reward = r;
      best.acc_q = accQ;
      best.latency = t;
      best.config = makeConfig(layers, c, mode);
    }
  });
  return best;
}

} // namespace

SyntheticOracle::SyntheticOracle(std::vector<std::string> layerIds, std::uint64_t seed,
                                 double acc8b)
    : ids_(std::move(layerIds)), acc8b_(acc8b) {
  Rng rng(seed);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    cW_.push_back(rng.uniform(0.02, 0.25));
    cA_.push_back(rng.uniform(0.02, 0.25));
  }
}

SyntheticOracle::SyntheticOracle(std::vector<std::string> layerIds, std::vector<double> cW,
                                 std::vector<double> cA, double acc8b)
    : ids_(std::move(layerIds)), cW_(std::move(cW)), cA_(std::move(cA)), acc8b_(acc8b) {
  if (cW_.size() != ids_.size() || cA_.size() != ids_.size()) {
    throw ValidationError("one weight and one activation coefficient per layer required");
  }
}

double SyntheticOracle::penalty(std::size_t layer, int wBit, int aBit) const {
  const auto term = [](double c, int bits) {
    return c * std::pow(std::max(0.0, static_cast<double>(kReferenceBits - bits)), kExponent);
  };
  return term(cW_[layer], wBit) + term(cA_[layer], aBit);
}

double SyntheticOracle::evaluate(const QuantConfig &config) {
  if (config.layers.size() != ids_.size()) {
    throw ValidationError("synthetic oracle expects " + std::to_string(ids_.size()) +
                          " layers, config has " + std::to_string(config.layers.size()));
  }
  double acc = acc8b_;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    acc -= penalty(i, config.layers[i].w_bit, config.layers[i].a_bit);
  }
  return acc;
}

std::vector<std::pair<int, int>> admissibleBits(std::size_t layer, std::size_t layerCount,
                                                ConstraintMode mode, const CimTarget &target) {
  std::vector<std::pair<int, int>> out;
  for (int w = target.b_min; w <= target.b_max; ++w) {
    for (int a = target.b_min; a <= target.b_max; ++a) {
      QuantConfig probe;
      probe.mode = mode;
      // A three-layer probe places this layer at the edge or in the middle.
      const bool edge = layer == 0 || layer + 1 == layerCount;
      const LayerBits fill{"", target.b_max, target.b_max};
      const LayerBits self{"", w, a};
      probe.layers = edge ? std::vector<LayerBits>{self, fill, fill}
                          : std::vector<LayerBits>{fill, self, fill};
      if (!probe.violation(target)) {
        out.emplace_back(w, a);
      }
    }
  }
  return out;
}

Optimum enumerateOptimum(const std::vector<cost::LayerDesc> &layers, const SyntheticOracle &oracle,
                         const CimTarget &target, ConstraintMode mode, double accLoss) {
  return search(layers, oracle, target, mode, accLoss, true);
}

Optimum bruteForceOptimum(const std::vector<cost::LayerDesc> &layers, const SyntheticOracle &oracle,
                          const CimTarget &target, ConstraintMode mode, double accLoss) {
  return search(layers, oracle, target, mode, accLoss, false);
}

} // namespace cimforge::aq
