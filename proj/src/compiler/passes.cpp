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

#include "cimforge/compiler/passes.h"

#include "cimforge/error.h"
#include "cimforge/quantizer.h"
#include "cimforge/xbar_sim.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cimforge::compiler {

namespace {

using TypeMap = std::map<std::string, TensorType>;

std::size_t indexOf(const Graph &g, const std::string &id) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].id == id) {
      return i;
    }
  }
  throw ValidationError("internal: node '" + id + "' vanished");
}

void removeNode(Graph &g, const std::string &id) { g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(indexOf(g, id))); }

void replaceUses(Graph &g, const std::string &from, const std::string &to) {
  for (auto &n : g.nodes) {
    std::replace(n.inputs.begin(), n.inputs.end(), from, to);
  }
  std::replace(g.outputs.begin(), g.outputs.end(), from, to);
}

/// The node reading `tensor` when it has exactly one reader and is not a
/// graph output.
const Node *soleConsumer(const Graph &g, const std::string &tensor) {
  if (g.isOutput(tensor)) {
    return nullptr;
  }
  auto users = g.consumers(tensor);
  if (users.size() != 1) {
    return nullptr;
  }
  // A node reading the tensor twice still counts once.
  return users[0];
}

bool soleConsumerIs(const Graph &g, const std::string &tensor, const std::string &id) {
  const Node *c = soleConsumer(g, tensor);
  return c && c->id == id;
}

const Node *producerOp(const Graph &g, const std::string &tensor, OpKind op) {
  const Node *p = g.producer(tensor);
  return p && p->op == op ? p : nullptr;
}

void removeDeadNodes(Graph &g) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto &n = g.nodes[i];
      if (!g.isOutput(n.output) && g.consumers(n.output).empty()) {
        g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
}

Node requantizeNode(std::string id, std::string input, std::string output, double multiplier,
                    const QuantParams &q) {
  Node r;
  r.id = std::move(id);
  r.op = OpKind::Requantize;
  r.inputs = {std::move(input)};
  r.output = std::move(output);
  r.integer = true;
  r.quant = q;
  r.multiplier = multiplier;
  return r;
}

Node reluNode(std::string id, std::string input, std::string output) {
  Node r;
  r.id = std::move(id);
  r.op = OpKind::ReLU;
  r.inputs = {std::move(input)};
  r.output = std::move(output);
  r.integer = true;
  return r;
}

/// Emits Requantize onto q's output, followed by an integer ReLU when a
/// rectifier precedes a signed quantizer.
void emitRequantize(Graph &g, const Node &q, const std::string &input, double inScale,
                    bool relu) {
  const double m = inScale / q.quant->scale;
  if (relu && q.quant->is_signed) {
    const auto mid = g.freshName(q.output + "_rq");
    g.nodes.push_back(requantizeNode(q.id, input, mid, m, *q.quant));
    g.nodes.push_back(reluNode(g.freshName(q.id + "_relu"), mid, q.output));
  } else {
    g.nodes.push_back(requantizeNode(q.id, input, q.output, m, *q.quant));
  }
}

// Quantize(Dequantize(x)) with identical parameters -> x.
bool cancelPair(Graph &g, const Node &q, const TypeMap &types) {
  if (q.op != OpKind::Quantize) {
    return false;
  }
  const Node *dq = producerOp(g, q.inputs[0], OpKind::Dequantize);
  if (!dq) {
    return false;
  }
  const auto &src = types.at(dq->inputs[0]);
  if (src.quant != *q.quant) {
    return false;
  }
  const auto from = q.output;
  const auto to = dq->inputs[0];
  if (g.isOutput(to) && g.isOutput(from)) {
    return false;
  }
  removeNode(g, q.id);
  replaceUses(g, from, to);
  return true;
}

bool allDequantized(const Graph &g, const Node &n) {
  return std::all_of(n.inputs.begin(), n.inputs.end(), [&](const std::string &t) {
    return producerOp(g, t, OpKind::Dequantize) != nullptr;
  });
}

std::vector<std::string> dequantizedSources(const Graph &g, const Node &n) {
  std::vector<std::string> out;
  for (const auto &t : n.inputs) {
    out.push_back(g.producer(t)->inputs[0]);
  }
  return out;
}

bool streamableBits(const TypeMap &types, const std::vector<std::string> &srcs) {
  return std::all_of(srcs.begin(), srcs.end(),
                     [&](const std::string &s) { return types.at(s).quant.bits <= 16; });
}

// DQ -> {Conv2D, Dense, MatMul} -> ... becomes an integer op.
bool integerCimOp(Graph &g, const Node &op, const TypeMap &types) {
  if (!isCimOp(op.op) || op.integer || !allDequantized(g, op)) {
    return false;
  }
  const auto srcs = dequantizedSources(g, op);
  if (!streamableBits(types, srcs)) {
    return false;
  }
  Node qop = op;
  qop.integer = true;
  qop.inputs = srcs;
  qop.output = g.freshName(op.output + "_acc");
  double accScale = types.at(srcs[0]).quant.scale;
  accScale *= op.op == OpKind::MatMul ? types.at(srcs[1]).quant.scale : op.weight->quant.scale;

  const Node *q = soleConsumer(g, op.output);
  const std::string opId = op.id;
  const std::string opOut = op.output;
  if (q && q->op == OpKind::Quantize) {
    const Node qCopy = *q;
    removeNode(g, qCopy.id);
    removeNode(g, opId);
    g.nodes.push_back(qop);
    emitRequantize(g, qCopy, qop.output, accScale, false);
    return true;
  }
  removeNode(g, opId);
  Node dq;
  dq.id = g.freshName(opId + "_dq");
  dq.op = OpKind::Dequantize;
  dq.inputs = {qop.output};
  dq.output = opOut;
  g.nodes.push_back(qop);
  g.nodes.push_back(dq);
  return true;
}

bool isHostElementwise(OpKind op) {
  return op == OpKind::ReLU || op == OpKind::MaxPool || op == OpKind::Flatten ||
         op == OpKind::Add;
}

// Quantize(E(Dequantize ...)) [with optional trailing ReLU] -> integer E +
// Requantize.
bool integerElementwise(Graph &g, const Node &q, const TypeMap &types) {
  if (q.op != OpKind::Quantize) {
    return false;
  }
  const Node *last = g.producer(q.inputs[0]);
  if (!last || last->integer || !isHostElementwise(last->op) ||
      !soleConsumerIs(g, last->output, q.id)) {
    return false;
  }
  const Node *base = last;
  bool relu = false;
  if (last->op == OpKind::ReLU && !allDequantized(g, *last)) {
    const Node *inner = g.producer(last->inputs[0]);
    if (!inner || inner->integer || !isHostElementwise(inner->op) ||
        inner->op == OpKind::ReLU || !soleConsumerIs(g, inner->output, last->id)) {
      return false;
    }
    base = inner;
    relu = true;
  }
  if (!allDequantized(g, *base)) {
    return false;
  }
  const auto srcs = dequantizedSources(g, *base);
  Node e = *base;
  e.integer = true;
  e.inputs = srcs;
  e.output = g.freshName(base->output + "_i");
  double scale = types.at(srcs[0]).quant.scale;
  if (base->op == OpKind::Add) {
    const double sa = types.at(srcs[0]).quant.scale;
    const double sb = types.at(srcs[1]).quant.scale;
    scale = std::max(sa, sb);
    e.add_multipliers = {sa / scale, sb / scale};
  }
  const Node qCopy = q;
  const std::string baseId = base->id;
  const std::string lastId = last->id;
  removeNode(g, qCopy.id);
  if (lastId != baseId) {
    removeNode(g, lastId);
  }
  removeNode(g, baseId);
  g.nodes.push_back(e);
  emitRequantize(g, qCopy, e.output, scale, relu);
  return true;
}

void rejectMixedInputs(const Graph &g) {
  for (const auto &n : g.nodes) {
    if (n.integer || n.op == OpKind::Quantize || n.op == OpKind::Dequantize) {
      continue;
    }
    bool anyDq = false;
    bool anyOther = false;
    for (const auto &t : n.inputs) {
      (producerOp(g, t, OpKind::Dequantize) ? anyDq : anyOther) = true;
    }
    if (anyDq && anyOther) {
      throw ValidationError("node '" + n.id +
                            "': mixed quantized and float operands are not covered by any rule");
    }
  }
}

template <typename Rule> Graph rewriteToFixpoint(Graph g, Rule rule) {
  g.sortTopologically();
  for (;;) {
    const auto types = g.inferTypes();
    bool changed = false;
    for (std::size_t i = 0; i < g.nodes.size() && !changed; ++i) {
      const Node n = g.nodes[i];
      changed = rule(g, n, types);
    }
    if (!changed) {
      break;
    }
    removeDeadNodes(g);
    g.sortTopologically();
  }
  removeDeadNodes(g);
  g.sortTopologically();
  return g;
}

// DQ(acc) -> BiasAdd(float) folds into the integer op producing acc.
bool foldBias(Graph &g, const Node &b, const TypeMap &types) {
  if (b.op != OpKind::BiasAdd) {
    return false;
  }
  const Node *dq = producerOp(g, b.inputs[0], OpKind::Dequantize);
  if (!dq || !soleConsumerIs(g, dq->output, b.id)) {
    return false;
  }
  const Node *p = g.producer(dq->inputs[0]);
  if (!p || !isCimOp(p->op) || !p->integer || p->op == OpKind::MatMul ||
      !soleConsumerIs(g, p->output, dq->id)) {
    return false;
  }
  const double sAcc = types.at(p->output).quant.scale;
  Node *prod = g.findNode(p->id);
  IntBias ib = prod->int_bias.value_or(IntBias{b.bias->size, std::nullopt});
  if (!prod->int_bias && b.bias->data) {
    ib.data = std::vector<std::int64_t>(static_cast<std::size_t>(ib.size), 0);
  }
  if (b.bias->data && ib.data) {
    for (std::size_t c = 0; c < ib.data->size(); ++c) {
      const double q = quant::roundHalfAway((*b.bias->data)[c] / sAcc);
      const double v = static_cast<double>((*ib.data)[c]) + q;
      if (v < std::numeric_limits<std::int32_t>::min() ||
          v > std::numeric_limits<std::int32_t>::max()) {
        throw ValidationError("node '" + b.id + "': bias does not fit 32 bits");
      }
      (*ib.data)[c] = static_cast<std::int64_t>(v);
    }
  } else {
    ib.data.reset();
  }
  prod->int_bias = std::move(ib);
  const std::string newOut = b.output;
  g.findNode(dq->id)->output = newOut;
  removeNode(g, b.id);
  return true;
}

// DQ(t) -> Q and DQ(t) -> ReLU(float) -> Q become Requantize.
bool requantizeLeaf(Graph &g, const Node &q, const TypeMap &types) {
  if (q.op != OpKind::Quantize) {
    return false;
  }
  const Node *src = g.producer(q.inputs[0]);
  bool relu = false;
  std::string reluId;
  if (src && src->op == OpKind::ReLU && !src->integer && soleConsumerIs(g, src->output, q.id)) {
    relu = true;
    reluId = src->id;
    src = g.producer(src->inputs[0]);
  }
  if (!src || src->op != OpKind::Dequantize) {
    return false;
  }
  const std::string t = src->inputs[0];
  const double scale = types.at(t).quant.scale;
  const Node qCopy = q;
  removeNode(g, qCopy.id);
  if (relu) {
    removeNode(g, reluId);
  }
  emitRequantize(g, qCopy, t, scale, relu);
  return true;
}

void rejectFloatLeaves(const Graph &g) {
  for (const auto &n : g.nodes) {
    if (n.integer || n.op == OpKind::Requantize) {
      continue;
    }
    if (n.op == OpKind::Quantize) {
      if (g.isInput(n.inputs[0])) {
        continue;
      }
    } else if (n.op == OpKind::Dequantize) {
      if (g.isOutput(n.output)) {
        continue;
      }
    }
    throw ValidationError("unfusable float leaf at node '" + n.id + "' (" +
                          std::string(opKindName(n.op)) + ")");
  }
}

} // namespace

Graph fq2iPass(const Graph &g) {
  Graph out = rewriteToFixpoint(g, [](Graph &gr, const Node &n, const TypeMap &types) {
    return cancelPair(gr, n, types) || integerCimOp(gr, n, types) ||
           integerElementwise(gr, n, types);
  });
  rejectMixedInputs(out);
  out.validate();
  return out;
}

Graph qnnFusePass(const Graph &g) {
  Graph out = rewriteToFixpoint(g, [](Graph &gr, const Node &n, const TypeMap &types) {
    return cancelPair(gr, n, types) || foldBias(gr, n, types) || requantizeLeaf(gr, n, types);
  });
  rejectFloatLeaves(out);
  out.validate();
  return out;
}

Graph partitionPass(const Graph &g) {
  Graph out = g;
  for (auto &n : out.nodes) {
    if (isCimOp(n.op)) {
      if (!n.integer) {
        throw ValidationError("node '" + n.id + "': float " + std::string(opKindName(n.op)) +
                              " cannot be placed on the crossbar");
      }
      n.placement = Placement::CIM;
    } else {
      n.placement = Placement::CPU;
    }
  }
  return out;
}

Graph configUpdatePass(const Graph &g, const CimTarget &target) {
  Graph out = g;
  out.sortTopologically();
  const auto layers = extractLayers(out);
  const auto config = extractConfig(out);
  std::size_t k = 0;
  for (auto &n : out.nodes) {
    if (n.placement != Placement::CIM) {
      continue;
    }
    const auto &l = layers[k];
    const auto &bits = config.layers[k];
    const auto signs = operandSigns(out, n);
    ++k;
    n.cim_config = {
        {"w_bit", bits.w_bit},
        {"a_bit", bits.a_bit},
        {"w_signed", signs.weight},
        {"a_signed", signs.activation},
        {"r_cell", target.r_cell},
        {"r_dac", target.r_dac},
        {"weight_slices", xbar::weightSliceCount(bits.w_bit, target.r_cell)},
        {"input_planes", xbar::inputPlaneCount(bits.a_bit, target.r_dac)},
        {"m_l", l.m_l},
        {"n_l", l.n_l},
        {"v_l", l.v_l},
        {"r_repeat", l.r_repeat},
    };
  }
  return out;
}

Graph prepareGraph(const Graph &g, const CimTarget &target) {
  return configUpdatePass(partitionPass(qnnFusePass(fq2iPass(g))), target);
}

std::vector<cost::LayerDesc> extractLayers(const Graph &g) {
  const auto types = g.inferTypes();
  Graph sorted = g;
  sorted.sortTopologically();
  std::vector<cost::LayerDesc> layers;
  for (const auto &n : sorted.nodes) {
    if (!isCimOp(n.op)) {
      continue;
    }
    const auto &in = types.at(n.inputs[0]).shape;
    if (n.op == OpKind::Dense) {
      const auto m = n.weight->shape[0];
      const auto k = n.weight->shape[1];
      layers.push_back(in.size() == 2 ? cost::denseLayer(n.id, m, k, in[0])
                                      : cost::denseLayer(n.id, m, k));
    } else if (n.op == OpKind::Conv2D) {
      const auto &out = types.at(n.output).shape;
      cost::ConvParams p;
      p.c_in = n.weight->shape[1];
      p.c_out = n.weight->shape[0];
      p.k_h = n.weight->shape[2];
      p.k_w = n.weight->shape[3];
      p.h_out = out[1];
      p.w_out = out[2];
      layers.push_back(cost::convLayer(n.id, p));
    } else {
      layers.push_back(cost::matmulLayer(n.id, in[0], n.matmul.k, n.matmul.n, n.matmul.heads));
    }
  }
  return layers;
}

namespace {

/// Integer type behind a tensor, looking through a Dequantize.
const TensorType &integerSource(const Graph &g, const TypeMap &types, const std::string &t) {
  const auto &type = types.at(t);
  if (type.dtype == DType::Int) {
    return type;
  }
  if (const Node *dq = producerOp(g, t, OpKind::Dequantize)) {
    return types.at(dq->inputs[0]);
  }
  throw ValidationError("tensor '" + t + "' carries no quantization parameters");
}

} // namespace

QuantConfig extractConfig(const Graph &g) {
  const auto types = g.inferTypes();
  Graph sorted = g;
  sorted.sortTopologically();
  QuantConfig cfg;
  for (const auto &n : sorted.nodes) {
    if (!isCimOp(n.op)) {
      continue;
    }
    LayerBits b;
    b.layer_id = n.id;
    b.a_bit = integerSource(sorted, types, n.inputs[0]).quant.bits;
    b.w_bit = n.op == OpKind::MatMul ? integerSource(sorted, types, n.inputs[1]).quant.bits
                                     : n.weight->quant.bits;
    cfg.layers.push_back(b);
  }
  return cfg;
}

OperandSigns operandSigns(const Graph &g, const Node &n) {
  const auto types = g.inferTypes();
  OperandSigns s;
  s.activation = integerSource(g, types, n.inputs[0]).quant.is_signed;
  s.weight = n.op == OpKind::MatMul ? integerSource(g, types, n.inputs[1]).quant.is_signed
                                    : n.weight->quant.is_signed;
  return s;
}

} // namespace cimforge::compiler
