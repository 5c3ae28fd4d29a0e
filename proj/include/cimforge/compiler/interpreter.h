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

#include <span>
#include <vector>

namespace cimforge::compiler {

/// Throws ValidationError unless every graph input is present with the
/// declared shape, dtype and quantization range.
void checkInputs(const Graph &g, const ValueMap &inputs);

/// Evaluates one node on the host. Integer Conv2D/Dense/MatMul accumulate
/// in 64 bits and raise OverflowError when sum |w| |x| of any output
/// reaches 2^31 or the biased result leaves the 32-bit range.
Value evaluateNode(const Node &n, std::span<const Value *const> inputs, const TensorType &out);

/// Direct reference execution of the whole graph. Returns the graph
/// outputs, or every tensor when keepAll is set.
ValueMap evaluate(const Graph &g, const ValueMap &inputs, bool keepAll = false);

/// Stationary operand of a CIM node as an (N_l x M_l) integer matrix for
/// one repeat (attention head), together with the streamed input vectors
/// (V_l x N_l) of that repeat.
struct GemmOperands {
  std::int64_t n_l = 0;
  std::int64_t m_l = 0;
  std::int64_t v_l = 0;
  std::vector<std::int32_t> weights; // n_l * m_l, row-major
  std::vector<std::int32_t> inputs;  // v_l * n_l, row-major
};

/// im2col / head slicing shared by the runtime and the lowering tests.
GemmOperands gemmOperands(const Node &n, std::span<const Value *const> inputs, std::int64_t head);

/// Scatters one repeat's (V_l x M_l) GEMM result into the node's output
/// layout.
void scatterGemmResult(const Node &n, std::int64_t head, std::span<const std::int64_t> result,
                       std::int64_t vL, std::int64_t mL, Value &out);

} // namespace cimforge::compiler
