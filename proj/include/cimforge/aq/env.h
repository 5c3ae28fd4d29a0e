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
#include "cimforge/cost_model.h"
#include "cimforge/quant_config.h"
#include "cimforge/target.h"

#include <vector>

namespace cimforge::aq {

/// Reward weights: penalty per percent below target, gain per unit of
/// speedup, bonus per percent above target.
inline constexpr double kAlpha = 10.0;
inline constexpr double kBeta = 100.0;
inline constexpr double kGamma = 0.1;

/// acc_8b - acc_loss, in percent.
double accuracyTarget(double acc8b, double accLoss);

/// Below the target: -alpha (acc_t - acc_q). Otherwise
/// beta (T_8b / T_q - 1) + gamma (acc_q - acc_t).
double reward(double accQ, double accT, double t8b, double tQ);
double reward(double accQ, double accT, Micros t8b, Micros tQ);

enum class BitRole { Weight, Activation };

/// round(b_min + a (b_max - b_min)), then the mode's projection: first and
/// last layers pinned to b_max under io/both, weight widths moved to the
/// nearest multiple of r_cell (ties upward) within range under
/// weight/both.
int actionToBits(double a, std::size_t layer, std::size_t layerCount, BitRole role,
                 ConstraintMode mode, const CimTarget &target);

/// Throws ValidationError when no configuration satisfies the mode on this
/// target (e.g. no multiple of r_cell within [b_min, b_max]).
void checkModeSatisfiable(ConstraintMode mode, const CimTarget &target);

/// Per-layer observations with the previous-action features at zero:
/// [k, kind one-hot (3), log M_l, log N_l, log V_l, 0, 0]. The index and
/// log features are min-max normalized over the layers (0 when constant).
std::vector<Observation> layerObservations(const std::vector<cost::LayerDesc> &layers);

/// Sets the previous-action features.
Observation withPreviousAction(Observation obs, const Action &previous);

} // namespace cimforge::aq
