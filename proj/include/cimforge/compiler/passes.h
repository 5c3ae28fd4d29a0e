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
#include "cimforge/cost_model.h"
#include "cimforge/quant_config.h"
#include "cimforge/target.h"

#include <vector>

namespace cimforge::compiler {

/// Folds Quantize/Dequantize pairs into integer operators.
///
/// Rules, applied until none matches:
///  - Quantize(Dequantize(x)) with identical parameters becomes x.
///  - Conv2D/Dense/MatMul whose operands are all dequantized becomes its
///    integer form producing a 32-bit accumulator. A sole Quantize consumer
///    turns into a Requantize; otherwise a Dequantize keeps float users fed.
///  - Quantize(E(Dequantize ...)) for E in {ReLU, MaxPool, Flatten, Add},
///    optionally followed by ReLU, becomes integer E plus Requantize.
/// Throws ValidationError for a float op that mixes dequantized and float
/// operands.
Graph fq2iPass(const Graph &g);

/// Rewrites the float leaves left by fq2iPass: float bias after an integer
/// accumulator is folded into a 32-bit bias, Dequantize -> [ReLU] ->
/// Quantize becomes Requantize, and matching Q/DQ pairs cancel.
/// Throws ValidationError ("unfusable float leaf") when float compute
/// remains. Only a final Dequantize may feed a graph output.
Graph qnnFusePass(const Graph &g);

/// Places integer Conv2D/Dense/MatMul on the crossbar and every other node
/// on the host.
Graph partitionPass(const Graph &g);

/// Stores the per-layer precision and bit-splitting record in the cim_config
/// attribute of every CIM node.
Graph configUpdatePass(const Graph &g, const CimTarget &target);

/// fq2i, qnn_fuse, partition and config_update in order.
Graph prepareGraph(const Graph &g, const CimTarget &target);

/// Crossbar-eligible layers in topological order, with the dimensions the
/// cost model needs. Works on QDQ and integer graphs alike.
std::vector<cost::LayerDesc> extractLayers(const Graph &g);

/// Weight and activation widths of every crossbar-eligible layer, read from
/// the stationary operand and the streamed input.
QuantConfig extractConfig(const Graph &g);

/// Signedness of the streamed input and the stationary operand.
struct OperandSigns {
  bool activation = true;
  bool weight = true;
};
OperandSigns operandSigns(const Graph &g, const Node &n);

} // namespace cimforge::compiler
