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

#include "cimforge/target.h"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cimforge {

/// Search-space restriction applied to every emitted configuration.
enum class ConstraintMode { None, InputOutput, Weight, Both };

std::string_view constraintModeName(ConstraintMode mode);
/// Accepts "none", "io", "weight", "both".
ConstraintMode parseConstraintMode(std::string_view text);

inline bool pinsInputOutput(ConstraintMode m) {
  return m == ConstraintMode::InputOutput || m == ConstraintMode::Both;
}
inline bool restrictsWeights(ConstraintMode m) {
  return m == ConstraintMode::Weight || m == ConstraintMode::Both;
}

struct LayerBits {
  std::string layer_id;
  int w_bit = 8;
  int a_bit = 8;

  bool operator==(const LayerBits &) const = default;
};

/// Per-layer (weight bits, activation bits) assignment, in layer order.
struct QuantConfig {
  std::vector<LayerBits> layers;
  ConstraintMode mode = ConstraintMode::None;

  const LayerBits *find(std::string_view layerId) const;

  /// Every layer at the same weight and activation width.
  static QuantConfig uniform(const std::vector<std::string> &layerIds, int bits,
                             ConstraintMode mode = ConstraintMode::None);

  /// Describes the first violated invariant, or nullopt when the config is
  /// valid for the target: bits within [b_min, b_max], pinned first/last
  /// layers for io/both, weight widths that are multiples of r_cell for
  /// weight/both.
  std::optional<std::string> violation(const CimTarget &target) const;
  void validate(const CimTarget &target) const;

  bool operator==(const QuantConfig &) const = default;
};

nlohmann::json quantConfigToJson(const QuantConfig &config);
QuantConfig quantConfigFromJson(const nlohmann::json &j);

} // namespace cimforge
