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

#include "cimforge/compiler/model_io.h"

#include "cimforge/error.h"

#include <cmath>
#include <fstream>
#include <set>

namespace cimforge::compiler {

using nlohmann::json;

namespace {

constexpr const char *kModelFormat = "cimforge-model";
constexpr const char *kTensorFormat = "cimforge-tensors";
constexpr int kVersion = 1;

void flattenInto(const json &j, std::vector<double> &out) {
  if (j.is_array()) {
    for (const auto &e : j) {
      flattenInto(e, out);
    }
  } else if (j.is_number()) {
    out.push_back(j.get<double>());
  } else {
    throw ParseError("tensor data must contain only numbers");
  }
}

std::vector<double> flatNumbers(const json &j) {
  std::vector<double> out;
  flattenInto(j, out);
  return out;
}

template <typename Int> std::vector<Int> flatIntegers(const json &j) {
  std::vector<Int> out;
  for (double v : flatNumbers(j)) {
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
      throw ParseError("integer tensor holds non-integer value " + json(v).dump());
    }
    out.push_back(static_cast<Int>(v));
  }
  return out;
}

Shape parseShape(const json &j) {
  if (!j.is_array()) {
    throw ParseError("shape must be an array");
  }
  Shape s;
  for (const auto &d : j) {
    s.push_back(d.get<std::int64_t>());
  }
  return s;
}

QuantParams parseQuant(const json &j) {
  QuantParams q;
  q.scale = j.at("scale").get<double>();
  q.bits = j.at("bits").get<int>();
  q.is_signed = j.value("signed", true);
  return q;
}

json quantToJson(const QuantParams &q) {
  return {{"scale", q.scale}, {"bits", q.bits}, {"signed", q.is_signed}};
}

Window2D parseWindow(const json &j) {
  if (j.is_number_integer()) {
    auto v = j.get<std::int64_t>();
    return {v, v};
  }
  if (!j.is_array() || j.size() != 2) {
    throw ParseError("window attribute must be an integer or a pair");
  }
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

json windowToJson(const Window2D &w) { return json::array({w.h, w.w}); }

TensorType parseTensorType(const json &j) {
  TensorType t;
  t.shape = parseShape(j.at("shape"));
  const auto dtype = j.value("dtype", std::string("float"));
  if (dtype == "int") {
    t.dtype = DType::Int;
    t.quant = parseQuant(j);
  } else if (dtype == "float") {
    t.dtype = DType::Float;
  } else {
    throw ParseError("unknown dtype '" + dtype + "'");
  }
  return t;
}

json tensorTypeToJson(const TensorType &t) {
  json j{{"shape", t.shape}};
  if (t.dtype == DType::Int) {
    j["dtype"] = "int";
    j["scale"] = t.quant.scale;
    j["bits"] = t.quant.bits;
    j["signed"] = t.quant.is_signed;
  } else {
    j["dtype"] = "float";
  }
  return j;
}

WeightTensor parseWeight(const json &j) {
  WeightTensor w;
  w.shape = parseShape(j.at("shape"));
  w.quant = parseQuant(j);
  if (j.contains("data")) {
    w.data = flatIntegers<std::int32_t>(j.at("data"));
  }
  return w;
}

json weightToJson(const WeightTensor &w) {
  json j{{"shape", w.shape}, {"scale", w.quant.scale}, {"bits", w.quant.bits},
         {"signed", w.quant.is_signed}};
  if (w.data) {
    j["data"] = *w.data;
  }
  return j;
}

const std::set<std::string> kAttrKeys = {
    "quant", "multiplier", "weight", "bias",   "int_bias",  "stride", "padding",
    "kernel", "transpose_b", "heads", "k",     "n",         "a_offset",
    "b_offset", "mode",     "multipliers", "cim_config"};

Node parseNode(const json &j) {
  Node n;
  n.id = j.at("id").get<std::string>();
  try {
    n.op = parseOpKind(j.at("op").get<std::string>());
    n.inputs = j.at("inputs").get<std::vector<std::string>>();
    n.output = j.at("output").get<std::string>();
    n.integer = j.value("integer", false);
    n.placement = parsePlacement(j.value("placement", std::string("Unassigned")));
    const json attrs = j.value("attrs", json::object());
    for (const auto &[key, _] : attrs.items()) {
      if (!kAttrKeys.count(key)) {
        throw ParseError("unknown attribute '" + key + "'");
      }
    }
    if (attrs.contains("quant")) {
      n.quant = parseQuant(attrs["quant"]);
    }
    n.multiplier = attrs.value("multiplier", 1.0);
    if (attrs.contains("weight")) {
      n.weight = parseWeight(attrs["weight"]);
    }
    if (attrs.contains("bias")) {
      FloatBias b;
      b.size = attrs["bias"].at("size").get<std::int64_t>();
      if (attrs["bias"].contains("data")) {
        b.data = flatNumbers(attrs["bias"]["data"]);
      }
      n.bias = std::move(b);
    }
    if (attrs.contains("int_bias")) {
      IntBias b;
      b.size = attrs["int_bias"].at("size").get<std::int64_t>();
      if (attrs["int_bias"].contains("data")) {
        b.data = flatIntegers<std::int64_t>(attrs["int_bias"]["data"]);
      }
      n.int_bias = std::move(b);
    }
    if (attrs.contains("kernel")) {
      n.kernel = parseWindow(attrs["kernel"]);
    }
    n.stride = attrs.contains("stride") ? parseWindow(attrs["stride"])
               : n.op == OpKind::MaxPool ? n.kernel
                                         : Window2D{1, 1};
    if (attrs.contains("padding")) {
      n.padding = parseWindow(attrs["padding"]);
    }
    if (n.op == OpKind::MatMul) {
      if (!attrs.contains("k") || !attrs.contains("n")) {
        throw ParseError("MatMul needs attributes k and n");
      }
      n.matmul.transpose_b = attrs.value("transpose_b", false);
      n.matmul.heads = attrs.value("heads", std::int64_t{1});
      n.matmul.k = attrs["k"].get<std::int64_t>();
      n.matmul.n = attrs["n"].get<std::int64_t>();
      n.matmul.a_offset = attrs.value("a_offset", std::int64_t{0});
      n.matmul.b_offset = attrs.value("b_offset", std::int64_t{0});
    }
    const auto mode = attrs.value("mode", std::string("flatten"));
    if (mode == "tokens") {
      n.flatten = FlattenMode::Tokens;
    } else if (mode != "flatten") {
      throw ParseError("unknown Flatten mode '" + mode + "'");
    }
    if (attrs.contains("multipliers")) {
      n.add_multipliers = attrs["multipliers"].get<std::vector<double>>();
    }
    if (attrs.contains("cim_config")) {
      n.cim_config = attrs["cim_config"];
    }
  } catch (const ParseError &e) {
    throw ParseError("node '" + n.id + "': " + e.what());
  } catch (const json::exception &e) {
    throw ParseError("node '" + n.id + "': " + e.what());
  }
  return n;
}

json nodeToJson(const Node &n) {
  json attrs = json::object();
  if (n.quant) {
    attrs["quant"] = quantToJson(*n.quant);
  }
  if (n.op == OpKind::Requantize) {
    attrs["multiplier"] = n.multiplier;
  }
  if (n.weight) {
    attrs["weight"] = weightToJson(*n.weight);
  }
  if (n.bias) {
    attrs["bias"] = {{"size", n.bias->size}};
    if (n.bias->data) {
      attrs["bias"]["data"] = *n.bias->data;
    }
  }
  if (n.int_bias) {
    attrs["int_bias"] = {{"size", n.int_bias->size}};
    if (n.int_bias->data) {
      attrs["int_bias"]["data"] = *n.int_bias->data;
    }
  }
  if (n.op == OpKind::Conv2D) {
    attrs["stride"] = windowToJson(n.stride);
    attrs["padding"] = windowToJson(n.padding);
  }
  if (n.op == OpKind::MaxPool) {
    attrs["kernel"] = windowToJson(n.kernel);
    attrs["stride"] = windowToJson(n.stride);
    attrs["padding"] = windowToJson(n.padding);
  }
  if (n.op == OpKind::MatMul) {
    attrs["transpose_b"] = n.matmul.transpose_b;
    attrs["heads"] = n.matmul.heads;
    attrs["k"] = n.matmul.k;
    attrs["n"] = n.matmul.n;
    attrs["a_offset"] = n.matmul.a_offset;
    attrs["b_offset"] = n.matmul.b_offset;
  }
  if (n.op == OpKind::Flatten) {
    attrs["mode"] = n.flatten == FlattenMode::Tokens ? "tokens" : "flatten";
  }
  if (!n.add_multipliers.empty()) {
    attrs["multipliers"] = n.add_multipliers;
  }
  if (!n.cim_config.is_null()) {
    attrs["cim_config"] = n.cim_config;
  }
  return {{"id", n.id},
          {"op", opKindName(n.op)},
          {"inputs", n.inputs},
          {"output", n.output},
          {"integer", n.integer},
          {"placement", placementName(n.placement)},
          {"attrs", attrs}};
}

} // namespace

Graph parseModel(const json &j) {
  Graph g;
  try {
    if (!j.is_object() || j.value("format", std::string()) != kModelFormat) {
      throw ParseError(std::string("not a model file (format must be \"") + kModelFormat + "\")");
    }
    if (j.value("version", 0) != kVersion) {
      throw ParseError("unsupported model version");
    }
    g.name = j.value("name", std::string("model"));
    for (const auto &in : j.at("inputs")) {
      g.inputs.push_back({in.at("name").get<std::string>(), parseTensorType(in)});
    }
    g.outputs = j.at("outputs").get<std::vector<std::string>>();
    for (const auto &n : j.at("nodes")) {
      g.nodes.push_back(parseNode(n));
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
  g.validate();
  return g;
}

json modelToJson(const Graph &g) {
  json inputs = json::array();
  for (const auto &in : g.inputs) {
    json t = tensorTypeToJson(in.type);
    t["name"] = in.name;
    inputs.push_back(std::move(t));
  }
  json nodes = json::array();
  for (const auto &n : g.nodes) {
    nodes.push_back(nodeToJson(n));
  }
  return {{"format", kModelFormat}, {"version", kVersion}, {"name", g.name},
          {"inputs", inputs},       {"outputs", g.outputs}, {"nodes", nodes}};
}

Graph loadModel(const std::filesystem::path &path) {
  try {
    return parseModel(readJsonFile(path));
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void saveModel(const Graph &g, const std::filesystem::path &path) {
  writeJsonFile(modelToJson(g), path);
}

json valueToJson(const Value &v) {
  json j = tensorTypeToJson(v.type);
  if (v.type.dtype == DType::Int) {
    j["data"] = v.ints;
  } else {
    j["data"] = v.floats;
  }
  return j;
}

Value valueFromJson(const json &j) {
  Value v;
  try {
    v.type = parseTensorType(j);
    if (v.type.dtype == DType::Int) {
      v.ints = flatIntegers<std::int64_t>(j.at("data"));
      if (static_cast<std::int64_t>(v.ints.size()) != v.size()) {
        throw ParseError("tensor data size does not match shape " + shapeToString(v.type.shape));
      }
    } else {
      v.floats = flatNumbers(j.at("data"));
      if (static_cast<std::int64_t>(v.floats.size()) != v.size()) {
        throw ParseError("tensor data size does not match shape " + shapeToString(v.type.shape));
      }
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed tensor: ") + e.what());
  }
  return v;
}

json valuesToJson(const ValueMap &values) {
  json tensors = json::object();
  for (const auto &[name, v] : values) {
    tensors[name] = valueToJson(v);
  }
  return {{"format", kTensorFormat}, {"tensors", tensors}};
}

ValueMap valuesFromJson(const json &j) {
  if (!j.is_object() || j.value("format", std::string()) != kTensorFormat ||
      !j.contains("tensors") || !j["tensors"].is_object()) {
    throw ParseError(std::string("not a tensor file (format must be \"") + kTensorFormat + "\")");
  }
  ValueMap out;
  for (const auto &[name, t] : j["tensors"].items()) {
    try {
      out[name] = valueFromJson(t);
    } catch (const ParseError &e) {
      throw ParseError("tensor '" + name + "': " + e.what());
    }
  }
  return out;
}

ValueMap loadValues(const std::filesystem::path &path) {
  try {
    return valuesFromJson(readJsonFile(path));
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json readJsonFile(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void writeJsonFile(const json &j, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << j.dump(1) << '\n';
}

} // namespace cimforge::compiler
