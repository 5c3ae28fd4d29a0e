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

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cimforge::compiler {

using Shape = std::vector<std::int64_t>;

std::int64_t numElements(const Shape &shape);
std::string shapeToString(const Shape &shape);

enum class OpKind {
  Conv2D,
  Dense,
  MatMul,
  Quantize,
  Dequantize,
  Requantize,
  BiasAdd,
  ReLU,
  Add,
  Flatten,
  MaxPool,
};

std::string_view opKindName(OpKind op);
/// Throws ParseError for names outside the op vocabulary.
OpKind parseOpKind(std::string_view name);

/// Ops that map onto the crossbar when their operands are integer.
inline bool isCimOp(OpKind op) {
  return op == OpKind::Conv2D || op == OpKind::Dense || op == OpKind::MatMul;
}

enum class Placement { Unassigned, CPU, CIM };

std::string_view placementName(Placement p);
Placement parsePlacement(std::string_view name);

enum class DType { Float, Int };

/// Symmetric quantization parameters of an integer tensor. Accumulators
/// use bits = 32.
struct QuantParams {
  double scale = 1.0;
  int bits = 8;
  bool is_signed = true;
  bool operator==(const QuantParams &) const = default;
};

inline constexpr int kAccumulatorBits = 32;

struct TensorType {
  Shape shape;
  DType dtype = DType::Float;
  /// Only meaningful for integer tensors.
  QuantParams quant;
  bool operator==(const TensorType &) const = default;
};

/// Integer weight constant with its frozen scale. A shape-only model
/// carries no data.
struct WeightTensor {
  Shape shape;
  QuantParams quant;
  std::optional<std::vector<std::int32_t>> data;
  bool operator==(const WeightTensor &) const = default;
};

/// Per-channel float bias of a BiasAdd node.
struct FloatBias {
  std::int64_t size = 0;
  std::optional<std::vector<double>> data;
  bool operator==(const FloatBias &) const = default;
};

/// 32-bit bias added to an integer accumulator.
struct IntBias {
  std::int64_t size = 0;
  std::optional<std::vector<std::int64_t>> data;
  bool operator==(const IntBias &) const = default;
};

struct Window2D {
  std::int64_t h = 1;
  std::int64_t w = 1;
  bool operator==(const Window2D &) const = default;
};

/// Multi-head product of two activation matrices. Head h multiplies
/// a[:, a_offset + h*k : +k] by a (k x n) view of b starting at column
/// b_offset + h*(k or n). With transpose_b the view is b[:, ...]^T and n is
/// the row count of b.
struct MatMulAttrs {
  bool transpose_b = false;
  std::int64_t heads = 1;
  std::int64_t k = 0;
  std::int64_t n = 0;
  std::int64_t a_offset = 0;
  std::int64_t b_offset = 0;
  bool operator==(const MatMulAttrs &) const = default;
};

enum class FlattenMode { Flatten, Tokens };

struct Node {
  std::string id;
  OpKind op = OpKind::ReLU;
  std::vector<std::string> inputs;
  std::string output;
  bool integer = false;
  Placement placement = Placement::Unassigned;

  /// Output parameters of Quantize and Requantize.
  std::optional<QuantParams> quant;
  /// Requantize scale factor s_in / s_out.
  double multiplier = 1.0;
  std::optional<WeightTensor> weight;
  std::optional<FloatBias> bias;
  std::optional<IntBias> int_bias;
  Window2D stride;
  Window2D padding{0, 0};
  Window2D kernel;
  MatMulAttrs matmul;
  FlattenMode flatten = FlattenMode::Flatten;
  /// Integer Add: per-input rescale onto the common output scale.
  std::vector<double> add_multipliers;
  /// Per-layer precision record attached by the config pass.
  nlohmann::json cim_config;

  bool operator==(const Node &) const = default;
};

struct GraphInput {
  std::string name;
  TensorType type;
  bool operator==(const GraphInput &) const = default;
};

struct Graph {
  std::string name = "model";
  std::vector<GraphInput> inputs;
  std::vector<std::string> outputs;
  std::vector<Node> nodes;

  /// Checks structure and infers every tensor type. Throws ValidationError
  /// for duplicate producers, dangling edges, cycles and shape mismatches.
  std::map<std::string, TensorType> inferTypes() const;
  void validate() const { (void)inferTypes(); }
  /// Reorders nodes so that producers precede consumers; stable for
  /// already sorted graphs.
  void sortTopologically();

  const Node *findNode(std::string_view id) const;
  Node *findNode(std::string_view id);
  const Node *producer(std::string_view tensor) const;
  std::vector<const Node *> consumers(std::string_view tensor) const;
  bool isOutput(std::string_view tensor) const;
  bool isInput(std::string_view tensor) const;
  /// Returns a tensor or node id not yet used in the graph.
  std::string freshName(std::string_view base) const;

  bool operator==(const Graph &) const = default;
};

std::size_t countOps(const Graph &g, OpKind op);
/// Number of Conv2D, Dense and MatMul nodes.
std::size_t countCimEligible(const Graph &g);

} // namespace cimforge::compiler
