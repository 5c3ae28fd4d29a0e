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

#include "cimforge/cost_model.h"
#include "cimforge/quant_config.h"
#include "cimforge/target.h"

#include <cstdint>
#include <string>
#include <vector>

namespace cimforge::aq {

/// Accuracy evaluator consulted once per episode. Accuracies are percent.
class AccuracyOracle {
public:
  virtual ~AccuracyOracle() = default;
  virtual std::string name() const = 0;
  /// Accuracy of the all-b_max configuration, the reference of the reward.
  virtual double baselineAccuracy() = 0;
  virtual double evaluate(const QuantConfig &config) = 0;
};

/// Closed-form accuracy model:
///   acc_q = acc_8b - sum_l c_w,l max(0, 8 - w_l)^p + c_a,l max(0, 8 - a_l)^p
class SyntheticOracle : public AccuracyOracle {
public:
  static constexpr double kExponent = 1.5;
  static constexpr double kDefaultBaseline = 70.0;

  /// Coefficients drawn uniformly from [0.02, 0.25] with the seed.
  SyntheticOracle(std::vector<std::string> layerIds, std::uint64_t seed,
                  double acc8b = kDefaultBaseline);
  SyntheticOracle(std::vector<std::string> layerIds, std::vector<double> cW,
                  std::vector<double> cA, double acc8b = kDefaultBaseline);

  std::string name() const override { return "synthetic"; }
  double baselineAccuracy() override { return acc8b_; }
  double evaluate(const QuantConfig &config) override;

  /// Accuracy lost by one layer at the given widths.
  double penalty(std::size_t layer, int wBit, int aBit) const;
  double acc8b() const { return acc8b_; }
  const std::vector<std::string> &layerIds() const { return ids_; }
  const std::vector<double> &weightCoefficients() const { return cW_; }
  const std::vector<double> &activationCoefficients() const { return cA_; }

private:
  std::vector<std::string> ids_;
  std::vector<double> cW_;
  std::vector<double> cA_;
  double acc8b_;
};

/// Best reward over every configuration admitted by the mode.
struct Optimum {
  QuantConfig config;
  double reward = 0.0;
  double acc_q = 0.0;
  Micros latency;
  /// Candidate configurations scored after per-layer Pareto pruning.
  std::uint64_t evaluated = 0;
};

/// Exhaustive search over all (w_bit, a_bit) per layer. Each layer's choices
/// are first reduced to those not dominated in (latency, penalty); a
/// dominated choice can never raise the reward, so the result is exact.
Optimum enumerateOptimum(const std::vector<cost::LayerDesc> &layers, const SyntheticOracle &oracle,
                         const CimTarget &target, ConstraintMode mode, double accLoss);

/// Same optimum by plain enumeration of the full product space. Only
/// practical for a few layers; used to cross-check the pruned search.
Optimum bruteForceOptimum(const std::vector<cost::LayerDesc> &layers, const SyntheticOracle &oracle,
                          const CimTarget &target, ConstraintMode mode, double accLoss);

/// Per-layer (w_bit, a_bit) choices allowed by the mode.
std::vector<std::pair<int, int>> admissibleBits(std::size_t layer, std::size_t layerCount,
                                                ConstraintMode mode, const CimTarget &target);

} // namespace cimforge::aq
