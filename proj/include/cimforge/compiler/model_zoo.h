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
#include "cimforge/compiler/model_io.h"
#include "cimforge/quant_config.h"
#include "cimforge/rng.h"

#include <cstdint>
#include <string>
#include <vector>

namespace cimforge::compiler {

/// Layer ids of the toy models, in execution order.
std::vector<std::string> toyMlpLayerIds();
std::vector<std::string> toyCnnLayerIds();

/// Four Dense layers 24 -> 64 -> 48 -> 32 -> 10 in QDQ form, with weights,
/// biases and activation scales calibrated from seeded random data. Bits
/// come from the config: w_bit for each weight, a_bit for each layer's
/// input.
Graph makeToyMlp(const QuantConfig &config, std::uint64_t seed);

/// Six crossbar layers on a 3x10x10 input: two 3x3 convolutions joined by
/// a residual Add, max pooling, two more convolutions, Flatten and two
/// Dense layers.
Graph makeToyCnn(const QuantConfig &config, std::uint64_t seed);

/// Dense(16->32) + ReLU and Dense(32->8) wrapped in Quantize/Dequantize.
Graph makeTwoLayerMlp(std::uint64_t seed);

/// Small random QDQ graph (dense stacks, convolutions with optional
/// residual and pooling, or attention-style MatMul) with random bit widths.
/// Biases lie on the accumulator grid.
Graph makeRandomGraph(std::uint64_t seed);

/// Shape-only layer graphs (no tensor data) at 8 bits.
Graph makeResNet18Shape();
/// conv 3->16 @32x32, conv 16->32 @16x16, conv 32->64 @8x8 with 2x2 pooling
/// between, then Dense 1024->128->10.
Graph makeCifarBenchmarkShape();
Graph makeVgg16Shape();
Graph makeVitB32Shape();

/// Uniform random values within each graph input's declared range.
ValueMap randomInputs(const Graph &g, Rng &rng);
/// All-zero inputs.
ValueMap zeroInputs(const Graph &g);

} // namespace cimforge::compiler
