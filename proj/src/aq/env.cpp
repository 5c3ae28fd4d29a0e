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

#include "cimforge/aq/env.h"

#include "cimforge/error.h"
#include "cimforge/quantizer.h"

#include <algorithm>
#include <cmath>

namespace cimforge::aq {

double accuracyTarget(double acc8b, double accLoss) {
  if (accLoss < 0.0 || accLoss > acc8b) {
    throw ValidationError("accuracy loss must lie in [0, acc_8b]");
  }
  return acc8b - accLoss;
}

double reward(double accQ, double accT, double t8b, double tQ) {
  if (!(tQ > 0.0)) {
    throw ValidationError("quantized latency must be positive");
  }
  if (accQ < accT) {
    return -kAlpha * (accT - accQ);
  }
  return kBeta * (t8b / tQ - 1.0) + kGamma * (accQ - accT);
}

double reward(double accQ, double accT, Micros t8b, Micros tQ) {
  return reward(accQ, accT, static_cast<double>(t8b.ticks()), static_cast<double>(tQ.ticks()));
}

void checkModeSatisfiable(ConstraintMode mode, const CimTarget &target) {
  if (!restrictsWeights(mode)) {
    return;
  }
  const int lo = (target.b_min + target.r_cell - 1) / target.r_cell * target.r_cell;
  if (lo > target.b_max) {
    throw ValidationError("no multiple of r_cell = " + std::to_string(target.r_cell) +
                          " lies in [" + std::to_string(target.b_min) + ", " +
                          std::to_string(target.b_max) + "]");
  }
  if (pinsInputOutput(mode) && target.b_max % target.r_cell != 0) {
    throw ValidationError("mode both pins edge layers to " + std::to_string(target.b_max) +
                          " bits, which is not a multiple of r_cell = " +
                          std::to_string(target.r_cell));
  }
}

int actionToBits(double a, std::size_t layer, std::size_t layerCount, BitRole role,
                 ConstraintMode mode, const CimTarget &target) {
  a = std::clamp(a, 0.0, 1.0);
  int b = static_cast<int>(
      quant::roundHalfAway(target.b_min + a * static_cast<double>(target.b_max - target.b_min)));
  b = std::clamp(b, target.b_min, target.b_max);
  if (pinsInputOutput(mode) && (layer == 0 || layer + 1 == layerCount)) {
    return target.b_max;
  }
  if (role == BitRole::Weight && restrictsWeights(mode)) {
    const int r = target.r_cell;
    const int lo = (target.b_min + r - 1) / r * r;
    const int hi = target.b_max / r * r;
    if (lo > hi) {
      checkModeSatisfiable(mode, target);
    }
    const int down = b / r * r;
    const int up = down == b ? b : down + r;
    b = (b - down < up - b) ? down : up;
    b = std::clamp(b, lo, hi);
  }
  return b;
}

std::vector<Observation> layerObservations(const std::vector<cost::LayerDesc> &layers) {
  std::vector<Observation> out(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto &l = layers[k];
    auto &o = out[k];
    o[0] = static_cast<double>(k);
    o[1] = l.kind == cost::LayerKind::Conv2D ? 1.0 : 0.0;
    o[2] = l.kind == cost::LayerKind::Dense ? 1.0 : 0.0;
    o[3] = l.kind == cost::LayerKind::MatMul ? 1.0 : 0.0;
    o[4] = std::log(static_cast<double>(l.m_l));
    o[5] = std::log(static_cast<double>(l.n_l));
    o[6] = std::log(static_cast<double>(l.v_l));
  }
  for (std::size_t f : {0, 4, 5, 6}) {
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      lo = k == 0 ? out[k][f] : std::min(lo, out[k][f]);
      hi = k == 0 ? out[k][f] : std::max(hi, out[k][f]);
    }
    for (auto &o : out) {
      o[f] = hi > lo ? (o[f] - lo) / (hi - lo) : 0.0;
    }
  }
  return out;
}

Observation withPreviousAction(Observation obs, const Action &previous) {
  obs[7] = previous[0];
  obs[8] = previous[1];
  return obs;
}

} // namespace cimforge::aq
