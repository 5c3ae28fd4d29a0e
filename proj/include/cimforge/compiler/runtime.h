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

#include "cimforge/compiler/lowering.h"
#include "cimforge/compiler/model_io.h"
#include "cimforge/micros.h"

#include <cstdint>
#include <string>
#include <vector>

namespace cimforge::compiler {

struct LayerMeasurement {
  std::string id;
  std::uint64_t writes = 0;
  std::uint64_t mvms = 0;
  /// writes * t_write + mvms * t_mvm.
  Micros latency;
};

struct RunResult {
  ValueMap outputs;
  std::vector<LayerMeasurement> layers;
  std::uint64_t writes = 0;
  std::uint64_t mvms = 0;
  Micros latency;
};

/// Executes the host program; CIM nodes are driven record by record
/// through a simulated crossbar. Throws OverflowError when an accumulator
/// would leave 32 bits and ValidationError on malformed traces or inputs.
RunResult runInference(const CompiledModel &model, const ValueMap &inputs);

} // namespace cimforge::compiler
