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

#include "cimforge/compiler/graph.h"

#include "cimforge/error.h"
#include "cimforge/quantizer.h"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace cimforge::compiler {

namespace {

struct OpName {
  OpKind op;
  std::string_view name;
};

constexpr OpName kOpNames[] = {
    {OpKind::Conv2D, "Conv2D"},         {OpKind::Dense, "Dense"},
    {OpKind::MatMul, "MatMul"},         {OpKind::Quantize, "Quantize"},
    {OpKind::Dequantize, "Dequantize"}, {OpKind::Requantize, "Requantize"},
    {OpKind::BiasAdd, "BiasAdd"},       {OpKind::ReLU, "ReLU"},
    {OpKind::Add, "Add"},               {OpKind::Flatten, "Flatten"},
    {OpKind::MaxPool, "MaxPool"},
};

[[noreturn]] void fail(const Node &n, const std::string &msg) {
  throw ValidationError("node '" + n.id + "' (" + std::string(opKindName(n.op)) + "): " + msg);
}

void expectInputs(const Node &n, std::size_t count) {
  if (n.inputs.size() != count) {
    fail(n, "expects " + std::to_string(count) + " input(s), got " +
                std::to_string(n.inputs.size()));
  }
}

void expectDtype(const Node &n, const TensorType &t, DType want, std::string_view what) {
  if (t.dtype != want) {
    fail(n, std::string(what) + " must be " + (want == DType::Int ? "integer" : "float"));
  }
}

TensorType accumulator(Shape shape, double scale) {
  return {std::move(shape), DType::Int, {scale, kAccumulatorBits, true}};
}

void checkQuant(const Node &n, const QuantParams &q) {
  if (!(q.scale > 0.0) || q.bits < 1 || q.bits > kAccumulatorBits) {
    fail(n, "quantization parameters need scale > 0 and bits in [1, 32]");
  }
}

void checkWeight(const Node &n, std::size_t rank) {
  if (!n.weight) {
    fail(n, "missing weight");
  }
  const auto &w = *n.weight;
  if (w.shape.size() != rank) {
    fail(n, "weight must have rank " + std::to_string(rank));
  }
  for (auto d : w.shape) {
    if (d < 1) {
      fail(n, "weight dimensions must be ≥ 1");
    }
  }
  checkQuant(n, w.quant);
  if (w.quant.bits > 16) {
    fail(n, "weight bits must be ≤ 16");
  }
  if (w.data && static_cast<std::int64_t>(w.data->size()) != numElements(w.shape)) {
    fail(n, "weight data has " + std::to_string(w.data->size()) + " values for shape " +
                shapeToString(w.shape));
  }
  if (w.data) {
    const auto hi = quant::levelMax(w.quant.bits, w.quant.is_signed);
    const auto lo = quant::levelMin(w.quant.bits, w.quant.is_signed);
    for (auto v : *w.data) {
      if (v < lo || v > hi) {
        fail(n, "weight value " + std::to_string(v) + " outside the " +
                    std::to_string(w.quant.bits) + "-bit range");
      }
    }
  }
}

void checkIntBias(const Node &n, std::int64_t channels) {
  if (!n.int_bias) {
    return;
  }
  if (!n.integer) {
    fail(n, "integer bias on a float op");
  }
  if (n.int_bias->size != channels ||
      (n.int_bias->data && static_cast<std::int64_t>(n.int_bias->data->size()) != channels)) {
    fail(n, "bias size must equal " + std::to_string(channels));
  }
}

std::int64_t windowOut(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t p) {
  if (in + 2 * p < k) {
    return 0;
  }
  return (in + 2 * p - k) / s + 1;
}

TensorType inferNode(const Node &n, const std::vector<const TensorType *> &in) {
  switch (n.op) {
  case OpKind::Quantize: {
    expectInputs(n, 1);
    expectDtype(n, *in[0], DType::Float, "input");
    if (!n.quant) {
      fail(n, "missing quantization parameters");
    }
    checkQuant(n, *n.quant);
    return {in[0]->shape, DType::Int, *n.quant};
  }
  case OpKind::Dequantize:
    expectInputs(n, 1);
    expectDtype(n, *in[0], DType::Int, "input");
    return {in[0]->shape, DType::Float, {}};
  case OpKind::Requantize: {
    expectInputs(n, 1);
    expectDtype(n, *in[0], DType::Int, "input");
    if (!n.quant) {
      fail(n, "missing quantization parameters");
    }
    checkQuant(n, *n.quant);
    if (!(n.multiplier > 0.0)) {
      fail(n, "multiplier must be > 0");
    }
    return {in[0]->shape, DType::Int, *n.quant};
  }
  case OpKind::Dense: {
    expectInputs(n, 1);
    checkWeight(n, 2);
    const auto &x = *in[0];
    expectDtype(n, x, n.integer ? DType::Int : DType::Float, "input");
    const auto m = n.weight->shape[0];
    const auto k = n.weight->shape[1];
    Shape out;
    if (x.shape.size() == 1 && x.shape[0] == k) {
      out = {m};
    } else if (x.shape.size() == 2 && x.shape[1] == k) {
      out = {x.shape[0], m};
    } else {
      fail(n, "shape mismatch: input " + shapeToString(x.shape) + " against weight " +
                  shapeToString(n.weight->shape));
    }
    checkIntBias(n, m);
    if (n.integer) {
      return accumulator(out, x.quant.scale * n.weight->quant.scale);
    }
    return {out, DType::Float, {}};
  }
  case OpKind::Conv2D: {
    expectInputs(n, 1);
    checkWeight(n, 4);
    const auto &x = *in[0];
    expectDtype(n, x, n.integer ? DType::Int : DType::Float, "input");
    const auto &ws = n.weight->shape;
    if (x.shape.size() != 3 || x.shape[0] != ws[1]) {
      fail(n, "shape mismatch: input " + shapeToString(x.shape) + " against weight " +
                  shapeToString(ws));
    }
    if (n.stride.h < 1 || n.stride.w < 1 || n.padding.h < 0 || n.padding.w < 0) {
      fail(n, "stride must be ≥ 1 and padding ≥ 0");
    }
    const auto ho = windowOut(x.shape[1], ws[2], n.stride.h, n.padding.h);
    const auto wo = windowOut(x.shape[2], ws[3], n.stride.w, n.padding.w);
    if (ho < 1 || wo < 1) {
      fail(n, "kernel larger than padded input");
    }
    checkIntBias(n, ws[0]);
    Shape out{ws[0], ho, wo};
    if (n.integer) {
      return accumulator(out, x.quant.scale * n.weight->quant.scale);
    }
    return {out, DType::Float, {}};
  }
  case OpKind::MatMul: {
    expectInputs(n, 2);
    const auto &a = *in[0];
    const auto &b = *in[1];
    const auto want = n.integer ? DType::Int : DType::Float;
    expectDtype(n, a, want, "first operand");
    expectDtype(n, b, want, "second operand");
    if (a.shape.size() != 2 || b.shape.size() != 2) {
      fail(n, "operands must be matrices");
    }
    const auto &mm = n.matmul;
    if (mm.heads < 1 || mm.k < 1 || mm.n < 1 || mm.a_offset < 0 || mm.b_offset < 0) {
      fail(n, "heads, k and n must be ≥ 1 and offsets ≥ 0");
    }
    if (mm.a_offset + mm.heads * mm.k > a.shape[1]) {
      fail(n, "first operand view exceeds its " + std::to_string(a.shape[1]) + " columns");
    }
    if (mm.transpose_b) {
      if (b.shape[0] != mm.n || mm.b_offset + mm.heads * mm.k > b.shape[1]) {
        fail(n, "shape mismatch in transposed second operand " + shapeToString(b.shape));
      }
    } else if (b.shape[0] != mm.k || mm.b_offset + mm.heads * mm.n > b.shape[1]) {
      fail(n, "shape mismatch in second operand " + shapeToString(b.shape));
    }
    if (n.weight || n.int_bias) {
      fail(n, "MatMul takes no weight or bias");
    }
    Shape out{a.shape[0], mm.heads * mm.n};
    if (n.integer) {
      return accumulator(out, a.quant.scale * b.quant.scale);
    }
    return {out, DType::Float, {}};
  }
  case OpKind::BiasAdd: {
    expectInputs(n, 1);
    expectDtype(n, *in[0], DType::Float, "input");
    if (!n.bias) {
      fail(n, "missing bias");
    }
    const auto &s = in[0]->shape;
    const auto channels = s.size() == 3 ? s[0] : s.back();
    if (n.bias->size != channels ||
        (n.bias->data && static_cast<std::int64_t>(n.bias->data->size()) != channels)) {
      fail(n, "bias size must equal " + std::to_string(channels));
    }
    return *in[0];
  }
  case OpKind::ReLU:
    expectInputs(n, 1);
    expectDtype(n, *in[0], n.integer ? DType::Int : DType::Float, "input");
    return *in[0];
  case OpKind::Add: {
    expectInputs(n, 2);
    const auto want = n.integer ? DType::Int : DType::Float;
    expectDtype(n, *in[0], want, "first operand");
    expectDtype(n, *in[1], want, "second operand");
    if (in[0]->shape != in[1]->shape) {
      fail(n, "shape mismatch: " + shapeToString(in[0]->shape) + " vs " +
                  shapeToString(in[1]->shape));
    }
    if (!n.integer) {
      return {in[0]->shape, DType::Float, {}};
    }
    if (n.add_multipliers.size() != 2 || !(n.add_multipliers[0] > 0.0) ||
        !(n.add_multipliers[1] > 0.0)) {
      fail(n, "integer Add needs two positive multipliers");
    }
    return accumulator(in[0]->shape, std::max(in[0]->quant.scale, in[1]->quant.scale));
  }
  case OpKind::Flatten: {
    expectInputs(n, 1);
    expectDtype(n, *in[0], n.integer ? DType::Int : DType::Float, "input");
    TensorType t = *in[0];
    if (n.flatten == FlattenMode::Tokens) {
      if (t.shape.size() != 3) {
        fail(n, "token mode needs a CHW input");
      }
      t.shape = {t.shape[1] * t.shape[2], t.shape[0]};
    } else {
      t.shape = {numElements(t.shape)};
    }
    return t;
  }
  case OpKind::MaxPool: {
    expectInputs(n, 1);
    expectDtype(n, *in[0], n.integer ? DType::Int : DType::Float, "input");
    TensorType t = *in[0];
    if (t.shape.size() != 3) {
      fail(n, "input must be CHW");
    }
    if (n.kernel.h < 1 || n.kernel.w < 1 || n.stride.h < 1 || n.stride.w < 1 ||
        n.padding.h < 0 || n.padding.w < 0 || n.padding.h >= n.kernel.h ||
        n.padding.w >= n.kernel.w) {
      fail(n, "invalid pooling window");
    }
    const auto ho = windowOut(t.shape[1], n.kernel.h, n.stride.h, n.padding.h);
    const auto wo = windowOut(t.shape[2], n.kernel.w, n.stride.w, n.padding.w);
    if (ho < 1 || wo < 1) {
      fail(n, "window larger than padded input");
    }
    t.shape = {t.shape[0], ho, wo};
    return t;
  }
  }
  fail(n, "unsupported op");
}

} // namespace

std::int64_t numElements(const Shape &shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

std::string shapeToString(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view opKindName(OpKind op) {
  for (const auto &e : kOpNames) {
    if (e.op == op) {
      return e.name;
    }
  }
  return "?";
}

OpKind parseOpKind(std::string_view name) {
  for (const auto &e : kOpNames) {
    if (e.name == name) {
      return e.op;
    }
  }
  throw ParseError("unknown op '" + std::string(name) + "'");
}

std::string_view placementName(Placement p) {
  switch (p) {
  case Placement::CPU:
    return "CPU";
  case Placement::CIM:
    return "CIM";
  case Placement::Unassigned:
    break;
  }
  return "Unassigned";
}

Placement parsePlacement(std::string_view name) {
  if (name == "CPU") {
    return Placement::CPU;
  }
  if (name == "CIM") {
    return Placement::CIM;
  }
  if (name == "Unassigned") {
    return Placement::Unassigned;
  }
  throw ParseError("unknown placement '" + std::string(name) + "'");
}

std::map<std::string, TensorType> Graph::inferTypes() const {
  std::map<std::string, TensorType> types;
  std::map<std::string, std::size_t> producerOf;
  std::set<std::string> ids;

  for (const auto &in : inputs) {
    if (in.name.empty() || types.count(in.name)) {
      throw ValidationError("duplicate or empty graph input '" + in.name + "'");
    }
    for (auto d : in.type.shape) {
      if (d < 1) {
        throw ValidationError("graph input '" + in.name + "' has a non-positive dimension");
      }
    }
    types[in.name] = in.type;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto &n = nodes[i];
    if (n.id.empty() || !ids.insert(n.id).second) {
      throw ValidationError("duplicate or empty node id '" + n.id + "'");
    }
    if (n.output.empty() || types.count(n.output) || producerOf.count(n.output)) {
      throw ValidationError("tensor '" + n.output + "' has more than one producer");
    }
    producerOf[n.output] = i;
  }
  for (const auto &n : nodes) {
    for (const auto &t : n.inputs) {
      if (!types.count(t) && !producerOf.count(t)) {
        throw ValidationError("dangling edge: node '" + n.id + "' reads unknown tensor '" + t +
                              "'");
      }
    }
  }

  // Kahn's algorithm over node indices, in file order among ready nodes.
  std::vector<std::size_t> pending(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> users(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto &t : nodes[i].inputs) {
      auto it = producerOf.find(t);
      if (it != producerOf.end()) {
        ++pending[i];
        users[it->second].push_back(i);
      }
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (pending[i] == 0) {
      ready.push(i);
    }
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    ++visited;
    const auto &n = nodes[i];
    std::vector<const TensorType *> in;
    for (const auto &t : n.inputs) {
      in.push_back(&types.at(t));
    }
    types[n.output] = inferNode(n, in);
    for (auto u : users[i]) {
      if (--pending[u] == 0) {
        ready.push(u);
      }
    }
  }
  if (visited != nodes.size()) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (pending[i] != 0) {
        throw ValidationError("graph has a cycle through node '" + nodes[i].id + "'");
      }
    }
  }
  for (const auto &o : outputs) {
    if (!types.count(o)) {
      throw ValidationError("graph output '" + o + "' is never produced");
    }
  }
  return types;
}

void Graph::sortTopologically() {
  std::map<std::string, std::size_t> producerOf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    producerOf[nodes[i].output] = i;
  }
  std::vector<std::size_t> pending(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> users(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto &t : nodes[i].inputs) {
      auto it = producerOf.find(t);
      if (it != producerOf.end()) {
        ++pending[i];
        users[it->second].push_back(i);
      }
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (pending[i] == 0) {
      ready.push(i);
    }
  }
  std::vector<Node> sorted;
  sorted.reserve(nodes.size());
  while (!ready.empty()) {
    const auto i = ready.top();
    ready.pop();
    sorted.push_back(nodes[i]);
    for (auto u : users[i]) {
      if (--pending[u] == 0) {
        ready.push(u);
      }
    }
  }
  if (sorted.size() != nodes.size()) {
    throw ValidationError("graph has a cycle");
  }
  nodes = std::move(sorted);
}

const Node *Graph::findNode(std::string_view id) const {
  for (const auto &n : nodes) {
    if (n.id == id) {
      return &n;
    }
  }
  return nullptr;
}

Node *Graph::findNode(std::string_view id) {
  for (auto &n : nodes) {
    if (n.id == id) {
      return &n;
    }
  }
  return nullptr;
}

const Node *Graph::producer(std::string_view tensor) const {
  for (const auto &n : nodes) {
    if (n.output == tensor) {
      return &n;
    }
  }
  return nullptr;
}

std::vector<const Node *> Graph::consumers(std::string_view tensor) const {
  std::vector<const Node *> out;
  for (const auto &n : nodes) {
    if (std::find(n.inputs.begin(), n.inputs.end(), tensor) != n.inputs.end()) {
      out.push_back(&n);
    }
  }
  return out;
}

bool Graph::isOutput(std::string_view tensor) const {
  return std::find(outputs.begin(), outputs.end(), tensor) != outputs.end();
}

bool Graph::isInput(std::string_view tensor) const {
  return std::any_of(inputs.begin(), inputs.end(),
                     [&](const GraphInput &i) { return i.name == tensor; });
}

std::string Graph::freshName(std::string_view base) const {
  auto used = [&](const std::string &s) {
    if (isInput(s)) {
      return true;
    }
    return std::any_of(nodes.begin(), nodes.end(),
                       [&](const Node &n) { return n.id == s || n.output == s; });
  };
  std::string name(base);
  for (int i = 1; used(name); ++i) {
    name = std::string(base) + "_" + std::to_string(i);
  }
  return name;
}

std::size_t countOps(const Graph &g, OpKind op) {
  return static_cast<std::size_t>(
      std::count_if(g.nodes.begin(), g.nodes.end(), [&](const Node &n) { return n.op == op; }));
}

std::size_t countCimEligible(const Graph &g) {
  return static_cast<std::size_t>(std::count_if(
      g.nodes.begin(), g.nodes.end(), [](const Node &n) { return isCimOp(n.op); }));
}

} // namespace cimforge::compiler
