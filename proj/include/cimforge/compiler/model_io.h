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

#include "cimforge/compiler/graph.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cimforge::compiler {

/// A runtime tensor. Integer tensors keep their values in `ints`, float
/// tensors in `floats`.
struct Value {
  TensorType type;
  std::vector<double> floats;
  std::vector<std::int64_t> ints;

  std::int64_t size() const { return numElements(type.shape); }
  bool operator==(const Value &) const = default;
};

using ValueMap = std::map<std::string, Value>;

/// Model files are JSON objects with "format": "cimforge-model", "version",
/// "name", "inputs", "outputs" and "nodes". Tensor data may be flat or
/// nested arrays.
Graph parseModel(const nlohmann::json &j);
nlohmann::json modelToJson(const Graph &g);
/// Parses and validates; errors name the path.
Graph loadModel(const std::filesystem::path &path);
void saveModel(const Graph &g, const std::filesystem::path &path);

/// Tensor files: {"format": "cimforge-tensors", "tensors": {name: {...}}}.
nlohmann::json valueToJson(const Value &v);
Value valueFromJson(const nlohmann::json &j);
nlohmann::json valuesToJson(const ValueMap &values);
ValueMap valuesFromJson(const nlohmann::json &j);
ValueMap loadValues(const std::filesystem::path &path);

/// Reads a whole JSON document; errors name the path.
nlohmann::json readJsonFile(const std::filesystem::path &path);
void writeJsonFile(const nlohmann::json &j, const std::filesystem::path &path);

} // namespace cimforge::compiler
