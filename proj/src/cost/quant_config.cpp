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

#include "cimforge/quant_config.h"

#include "cimforge/error.h"

namespace cimforge {

std::string_view constraintModeName(ConstraintMode mode) {
  switch (mode) {
  case ConstraintMode::None:
    return "none";
  case ConstraintMode::InputOutput:
    return "io";
  case ConstraintMode::Weight:
    return "weight";
  case ConstraintMode::Both:
    return "both";
  }
  return "none";
}

ConstraintMode parseConstraintMode(std::string_view text) {
  if (text == "none") {
    return ConstraintMode::None;
  }
  if (text == "io") {
    return ConstraintMode::InputOutput;
  }
  if (text == "weight") {
    return ConstraintMode::Weight;
  }
  if (text == "both") {
    return ConstraintMode::Both;
  }
  throw ValidationError("unknown constraint mode '" + std::string(text) +
                        "' (expected none, io, weight or both)");
}

const LayerBits *QuantConfig::find(std::string_view layerId) const {
  for (const auto &l : layers) {
    if (l.layer_id == layerId) {
      return &l;
    }
  }
  return nullptr;
}

QuantConfig QuantConfig::uniform(const std::vector<std::string> &layerIds, int bits,
                                 ConstraintMode mode) {
  QuantConfig c;
  c.mode = mode;
  for (const auto &id : layerIds) {
    c.layers.push_back({id, bits, bits});
  }
  return c;
}

std::optional<std::string> QuantConfig::violation(const CimTarget &target) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    for (int bits : {l.w_bit, l.a_bit}) {
      if (bits < target.b_min || bits > target.b_max) {
        return "layer '" + l.layer_id + "': bit width " + std::to_string(bits) +
               " outside [" + std::to_string(target.b_min) + ", " +
               std::to_string(target.b_max) + "]";
      }
    }
    const bool edge = i == 0 || i + 1 == layers.size();
    if (pinsInputOutput(mode) && edge && (l.w_bit != target.b_max || l.a_bit != target.b_max)) {
      return "layer '" + l.layer_id + "': first/last layer must stay at " +
             std::to_string(target.b_max) + " bits";
    }
    if (restrictsWeights(mode) && l.w_bit % target.r_cell != 0) {
      return "layer '" + l.layer_id + "': weight width " + std::to_string(l.w_bit) +
             " is not a multiple of r_cell = " + std::to_string(target.r_cell);
    }
  }
  return std::nullopt;
}

void QuantConfig::validate(const CimTarget &target) const {
  if (auto v = violation(target)) {
    throw ValidationError(*v);
  }
}

nlohmann::json quantConfigToJson(const QuantConfig &config) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &l : config.layers) {
    layers.push_back({{"layer", l.layer_id}, {"w_bit", l.w_bit}, {"a_bit", l.a_bit}});
  }
  return {{"constraint_mode", std::string(constraintModeName(config.mode))}, {"layers", layers}};
}

QuantConfig quantConfigFromJson(const nlohmann::json &j) {
  try {
    QuantConfig c;
    c.mode = parseConstraintMode(j.value("constraint_mode", std::string("none")));
    for (const auto &l : j.at("layers")) {
      c.layers.push_back({l.at("layer").get<std::string>(), l.at("w_bit").get<int>(),
                          l.at("a_bit").get<int>()});
    }
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("quant config: ") + e.what());
  }
}

} // namespace cimforge
