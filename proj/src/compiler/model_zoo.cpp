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

#include "cimforge/compiler/model_zoo.h"

#include "cimforge/compiler/interpreter.h"
#include "cimforge/error.h"
#include "cimforge/quantizer.h"

#include <algorithm>
#include <cmath>
#include <optional>

namespace cimforge::compiler {

namespace {

constexpr double kShapeOnlyScale = 0.05;
constexpr int kCalibrationSamples = 4;
/// Headroom over the calibrated peak.
constexpr double kCalibrationHeadroom = 1.0137;

QuantParams inputQuant(int bits) {
  return {1.0 / static_cast<double>(quant::levelMax(bits, true)), bits, true};
}

/// Builds QDQ graphs block by block. With an Rng every weight, bias and
/// activation scale is concrete (scales calibrated on random inputs);
/// without one the graph is shape-only.
class QdqBuilder {
public:
  QdqBuilder(std::string name, Shape shape, QuantParams quant, Rng *rng) : rng_(rng) {
    g_.name = std::move(name);
    g_.inputs.push_back({"x", {std::move(shape), DType::Int, quant}});
    if (rng_) {
      for (int i = 0; i < kCalibrationSamples; ++i) {
        calibration_.push_back(randomInputs(g_, *rng_));
      }
    }
  }

  std::string input() const { return "x"; }

  TensorType type(const std::string &t) const { return g_.inferTypes().at(t); }

  std::string dequantize(const std::string &x) {
    Node n;
    n.id = g_.freshName("dq");
    n.op = OpKind::Dequantize;
    n.inputs = {x};
    n.output = g_.freshName(x + "_f");
    return push(std::move(n));
  }

  std::string quantize(const std::string &y, int bits, bool isSigned,
                       std::optional<double> scale = std::nullopt) {
    if (!scale) {
      scale = rng_ ? calibrate(y, bits, isSigned) : kShapeOnlyScale;
    }
    Node n;
    n.id = g_.freshName("q");
    n.op = OpKind::Quantize;
    n.inputs = {y};
    n.output = g_.freshName("t");
    n.quant = QuantParams{*scale, bits, isSigned};
    return push(std::move(n));
  }

  std::string dense(const std::string &x, const std::string &id, std::int64_t out, int wBit,
                    bool bias, bool relu, int outBits, std::optional<double> outScale = {}) {
    const auto in = type(x);
    const auto fanIn = in.shape.back();
    Node n;
    n.id = id;
    n.op = OpKind::Dense;
    n.inputs = {dequantize(x)};
    n.output = g_.freshName(id + "_out");
    n.weight = makeWeight({out, fanIn}, fanIn, wBit);
    auto y = push(std::move(n));
    return finishBlock(y, id, out, in.quant.scale, bias, relu, outBits, outScale);
  }

  std::string conv(const std::string &x, const std::string &id, std::int64_t cout, std::int64_t k,
                   std::int64_t stride, std::int64_t pad, int wBit, bool bias, bool relu,
                   int outBits, std::optional<double> outScale = {}) {
    const auto in = type(x);
    const auto cin = in.shape[0];
    Node n;
    n.id = id;
    n.op = OpKind::Conv2D;
    n.inputs = {dequantize(x)};
    n.output = g_.freshName(id + "_out");
    n.weight = makeWeight({cout, cin, k, k}, cin * k * k, wBit);
    n.stride = {stride, stride};
    n.padding = {pad, pad};
    auto y = push(std::move(n));
    return finishBlock(y, id, cout, in.quant.scale, bias, relu, outBits, outScale);
  }

  std::string matmul(const std::string &a, const std::string &b, const std::string &id,
                     const MatMulAttrs &attrs, bool relu, int outBits) {
    Node n;
    n.id = id;
    n.op = OpKind::MatMul;
    n.inputs = {dequantize(a), dequantize(b)};
    n.output = g_.freshName(id + "_out");
    n.matmul = attrs;
    auto y = push(std::move(n));
    if (relu) {
      y = rectify(y);
    }
    return quantize(y, outBits, !relu);
  }

  std::string add(const std::string &a, const std::string &b, bool relu, int outBits,
                  std::optional<double> outScale = {}) {
    Node n;
    n.id = g_.freshName("add");
    n.op = OpKind::Add;
    n.inputs = {dequantize(a), dequantize(b)};
    n.output = g_.freshName("sum");
    auto y = push(std::move(n));
    if (relu) {
      y = rectify(y);
    }
    return quantize(y, outBits, !relu, outScale);
  }

  /// Pooling and flattening keep the input's quantization parameters.
  std::string maxPool(const std::string &x, std::int64_t k, std::int64_t s, std::int64_t pad = 0) {
    const auto q = type(x).quant;
    Node n;
    n.id = g_.freshName("pool");
    n.op = OpKind::MaxPool;
    n.inputs = {dequantize(x)};
    n.output = g_.freshName("pooled");
    n.kernel = {k, k};
    n.stride = {s, s};
    n.padding = {pad, pad};
    return quantize(push(std::move(n)), q.bits, q.is_signed, q.scale);
  }

  std::string flatten(const std::string &x, FlattenMode mode = FlattenMode::Flatten) {
    const auto q = type(x).quant;
    Node n;
    n.id = g_.freshName("flatten");
    n.op = OpKind::Flatten;
    n.inputs = {dequantize(x)};
    n.output = g_.freshName("flat");
    n.flatten = mode;
    return quantize(push(std::move(n)), q.bits, q.is_signed, q.scale);
  }

  Graph finish(const std::string &x) {
    const auto y = dequantize(x);
    g_.outputs = {y};
    g_.validate();
    return g_;
  }

private:
  std::string push(Node n) {
    auto out = n.output;
    g_.nodes.push_back(std::move(n));
    return out;
  }

  std::string rectify(const std::string &y) {
    Node n;
    n.id = g_.freshName("relu");
    n.op = OpKind::ReLU;
    n.inputs = {y};
    n.output = g_.freshName("act");
    return push(std::move(n));
  }

  WeightTensor makeWeight(Shape shape, std::int64_t fanIn, int wBit) {
    WeightTensor w;
    w.shape = std::move(shape);
    w.quant = {kShapeOnlyScale, wBit, true};
    if (!rng_) {
      return w;
    }
    std::vector<double> f(static_cast<std::size_t>(numElements(w.shape)));
    const double sd = std::sqrt(2.0 / static_cast<double>(fanIn));
    for (auto &v : f) {
      v = rng_->normal(0.0, sd);
    }
    const auto q = quant::quantizeSymmetric(f, wBit, true);
    w.quant.scale = q.scale;
    w.data = q.data;
    return w;
  }

  std::string finishBlock(std::string y, const std::string &id, std::int64_t channels,
                          double inScale, bool bias, bool relu, int outBits,
                          std::optional<double> outScale) {
    if (bias) {
      const double accScale = inScale * g_.findNode(id)->weight->quant.scale;
      FloatBias b;
      b.size = channels;
      if (rng_) {
        b.data = std::vector<double>(static_cast<std::size_t>(channels));
        for (auto &v : *b.data) {
          // On the accumulator grid.
          v = quant::roundHalfAway(rng_->normal(0.0, 0.1) / accScale) * accScale;
        }
      }
      Node n;
      n.id = g_.freshName(id + "_bias");
      n.op = OpKind::BiasAdd;
      n.inputs = {y};
      n.output = g_.freshName(id + "_biased");
      n.bias = std::move(b);
      y = push(std::move(n));
    }
    if (relu) {
      y = rectify(y);
    }
    return quantize(y, outBits, !relu, outScale);
  }

  double calibrate(const std::string &y, int bits, bool isSigned) {
    double peak = 0.0;
    for (const auto &in : calibration_) {
      const auto env = evaluate(g_, in, true);
      for (double v : env.at(y).floats) {
        peak = std::max(peak, isSigned ? std::abs(v) : v);
      }
    }
    if (peak <= 0.0) {
      peak = 1.0;
    }
    return peak * kCalibrationHeadroom / static_cast<double>(quant::levelMax(bits, isSigned));
  }

  Graph g_;
  Rng *rng_;
  std::vector<ValueMap> calibration_;
};

int bitsOf(const QuantConfig &c, std::size_t i, bool weight) {
  if (i >= c.layers.size()) {
    throw ValidationError("config has " + std::to_string(c.layers.size()) + " layers, model needs more");
  }
  return weight ? c.layers[i].w_bit : c.layers[i].a_bit;
}

void checkLayerIds(const QuantConfig &c, const std::vector<std::string> &ids) {
  if (c.layers.size() != ids.size()) {
    throw ValidationError("config must have " + std::to_string(ids.size()) + " layers");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (c.layers[i].layer_id != ids[i]) {
      throw ValidationError("config layer " + std::to_string(i) + " must be '" + ids[i] + "'");
    }
  }
}

} // namespace

std::vector<std::string> toyMlpLayerIds() { return {"fc1", "fc2", "fc3", "fc4"}; }

std::vector<std::string> toyCnnLayerIds() {
  return {"conv1", "conv2", "conv3", "conv4", "fc1", "fc2"};
}

Graph makeToyMlp(const QuantConfig &config, std::uint64_t seed) {
  checkLayerIds(config, toyMlpLayerIds());
  Rng rng(seed);
  auto w = [&](std::size_t i) { return bitsOf(config, i, true); };
  auto a = [&](std::size_t i) { return bitsOf(config, i, false); };
  QdqBuilder b("toy_mlp", {24}, inputQuant(a(0)), &rng);
  auto h = b.dense(b.input(), "fc1", 64, w(0), true, true, a(1));
  h = b.dense(h, "fc2", 48, w(1), true, true, a(2));
  h = b.dense(h, "fc3", 32, w(2), true, true, a(3));
  h = b.dense(h, "fc4", 10, w(3), true, false, 8);
  return b.finish(h);
}

Graph makeToyCnn(const QuantConfig &config, std::uint64_t seed) {
  checkLayerIds(config, toyCnnLayerIds());
  Rng rng(seed);
  auto w = [&](std::size_t i) { return bitsOf(config, i, true); };
  auto a = [&](std::size_t i) { return bitsOf(config, i, false); };
  QdqBuilder b("toy_cnn", {3, 10, 10}, inputQuant(a(0)), &rng);
  auto h1 = b.conv(b.input(), "conv1", 8, 3, 1, 1, w(0), true, true, a(1));
  auto h2 = b.conv(h1, "conv2", 8, 3, 1, 1, w(1), true, false, 8);
  auto h = b.add(h1, h2, true, a(2));
  h = b.maxPool(h, 2, 2);
  h = b.conv(h, "conv3", 16, 3, 1, 1, w(2), true, true, a(3));
  h = b.conv(h, "conv4", 16, 3, 2, 1, w(3), true, true, a(4));
  h = b.flatten(h);
  h = b.dense(h, "fc1", 32, w(4), true, true, a(5));
  h = b.dense(h, "fc2", 10, w(5), true, false, 8);
  return b.finish(h);
}

Graph makeTwoLayerMlp(std::uint64_t seed) {
  Rng rng(seed);
  QdqBuilder b("mlp2", {16}, inputQuant(8), &rng);
  auto h = b.dense(b.input(), "fc1", 32, 8, true, true, 8);
  h = b.dense(h, "fc2", 8, 8, true, false, 8);
  return b.finish(h);
}

Graph makeRandomGraph(std::uint64_t seed) {
  Rng rng(seed);
  auto bits = [&] { return static_cast<int>(rng.uniformInt(2, 8)); };
  auto coin = [&] { return rng.uniformInt(0, 1) == 1; };
  const auto kind = rng.uniformInt(0, 2);
  if (kind == 0) {
    const bool sequence = coin();
    Shape in = sequence ? Shape{rng.uniformInt(1, 4), rng.uniformInt(2, 40)}
                        : Shape{rng.uniformInt(2, 40)};
    QdqBuilder b("random_mlp", in, inputQuant(bits()), &rng);
    auto h = b.input();
    const auto layers = rng.uniformInt(1, 4);
    for (std::int64_t l = 0; l < layers; ++l) {
      const bool last = l + 1 == layers;
      const bool relu = !last && coin();
      h = b.dense(h, "fc" + std::to_string(l + 1), rng.uniformInt(1, 40), bits(), coin(), relu,
                  last ? 8 : bits());
    }
    return b.finish(h);
  }
  if (kind == 1) {
    Shape in{rng.uniformInt(1, 3), rng.uniformInt(4, 8), rng.uniformInt(4, 8)};
    QdqBuilder b("random_cnn", in, inputQuant(bits()), &rng);
    auto h = b.input();
    const auto convs = rng.uniformInt(1, 3);
    for (std::int64_t l = 0; l < convs; ++l) {
      const auto id = "conv" + std::to_string(l + 1);
      const auto t = b.type(h);
      if (coin() && t.shape[1] >= 3 && t.shape[2] >= 3) {
        // Residual pair sharing one scale, so the integer Add is exact.
        const auto c = t.shape[0];
        auto r = b.conv(h, id + "a", c, 3, 1, 1, bits(), coin(), true, bits());
        const auto s = b.type(r).quant.scale;
        auto r2 = b.conv(r, id + "b", c, 3, 1, 1, bits(), coin(), false, bits(), s);
        h = b.add(r, r2, true, bits());
      } else {
        const auto k = std::min<std::int64_t>({rng.uniformInt(1, 3), t.shape[1], t.shape[2]});
        h = b.conv(h, id, rng.uniformInt(1, 6), k, rng.uniformInt(1, 2), rng.uniformInt(0, 1),
                   bits(), coin(), true, bits());
      }
      const auto u = b.type(h);
      if (coin() && u.shape[1] >= 2 && u.shape[2] >= 2) {
        h = b.maxPool(h, 2, 2, rng.uniformInt(0, 1));
      }
    }
    h = b.flatten(h);
    const auto dense = rng.uniformInt(1, 2);
    for (std::int64_t l = 0; l < dense; ++l) {
      const bool last = l + 1 == dense;
      h = b.dense(h, "fc" + std::to_string(l + 1), rng.uniformInt(2, 20), bits(), coin(), !last,
                  last ? 8 : bits());
    }
    return b.finish(h);
  }
  const auto tokens = rng.uniformInt(2, 6);
  const auto dim = rng.uniformInt(2, 8);
  const auto heads = rng.uniformInt(1, 3);
  const auto headDim = rng.uniformInt(1, 4);
  QdqBuilder b("random_attention", {tokens, dim}, inputQuant(bits()), &rng);
  auto qk = b.dense(b.input(), "qk", 2 * heads * headDim, bits(), coin(), false, bits());
  MatMulAttrs scores{true, heads, headDim, tokens, 0, heads * headDim};
  auto s = b.matmul(qk, qk, "scores", scores, true, bits());
  auto v = b.dense(b.input(), "value", heads * headDim, bits(), coin(), false, bits());
  MatMulAttrs mix{false, heads, tokens, headDim, 0, 0};
  auto o = b.matmul(s, v, "mix", mix, false, bits());
  o = b.dense(o, "proj", rng.uniformInt(1, 8), bits(), coin(), false, 8);
  return b.finish(o);
}

Graph makeCifarBenchmarkShape() {
  QdqBuilder b("cifar_benchmark", {3, 32, 32}, inputQuant(8), nullptr);
  auto h = b.conv(b.input(), "conv1", 16, 3, 1, 1, 8, true, true, 8);
  h = b.maxPool(h, 2, 2);
  h = b.conv(h, "conv2", 32, 3, 1, 1, 8, true, true, 8);
  h = b.maxPool(h, 2, 2);
  h = b.conv(h, "conv3", 64, 3, 1, 1, 8, true, true, 8);
  h = b.maxPool(h, 2, 2);
  h = b.flatten(h);
  h = b.dense(h, "fc1", 128, 8, true, true, 8);
  h = b.dense(h, "fc2", 10, 8, true, false, 8);
  return b.finish(h);
}

Graph makeResNet18Shape() {
  QdqBuilder b("resnet18", {3, 224, 224}, inputQuant(8), nullptr);
  auto h = b.conv(b.input(), "conv1", 64, 7, 2, 3, 8, true, true, 8);
  h = b.maxPool(h, 3, 2, 1);
  std::int64_t channels = 64;
  const std::int64_t widths[] = {64, 128, 256, 512};
  for (int stage = 0; stage < 4; ++stage) {
    for (int block = 0; block < 2; ++block) {
      const auto prefix = "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
      const auto width = widths[stage];
      const std::int64_t stride = (stage > 0 && block == 0) ? 2 : 1;
      auto r = b.conv(h, prefix + ".conv1", width, 3, stride, 1, 8, true, true, 8);
      r = b.conv(r, prefix + ".conv2", width, 3, 1, 1, 8, true, false, 8);
      auto shortcut = h;
      if (stride != 1 || width != channels) {
        shortcut = b.conv(h, prefix + ".downsample", width, 1, stride, 0, 8, true, false, 8);
      }
      h = b.add(r, shortcut, true, 8);
      channels = width;
    }
  }
  h = b.maxPool(h, 7, 7);
  h = b.flatten(h);
  h = b.dense(h, "fc", 1000, 8, true, false, 8);
  return b.finish(h);
}

Graph makeVgg16Shape() {
  QdqBuilder b("vgg16", {3, 224, 224}, inputQuant(8), nullptr);
  const std::int64_t plan[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 0,
                               512, 512, 512, 0, 512, 512, 512, 0};
  auto h = b.input();
  int conv = 0;
  for (auto c : plan) {
    if (c == 0) {
      h = b.maxPool(h, 2, 2);
    } else {
      h = b.conv(h, "conv" + std::to_string(++conv), c, 3, 1, 1, 8, true, true, 8);
    }
  }
  h = b.flatten(h);
  h = b.dense(h, "fc1", 4096, 8, true, true, 8);
  h = b.dense(h, "fc2", 4096, 8, true, true, 8);
  h = b.dense(h, "fc3", 1000, 8, true, false, 8);
  return b.finish(h);
}

Graph makeVitB32Shape() {
  constexpr std::int64_t kDim = 768;
  constexpr std::int64_t kHeads = 12;
  constexpr std::int64_t kHeadDim = 64;
  constexpr std::int64_t kTokens = 49;
  QdqBuilder b("vit_b32", {3, 224, 224}, inputQuant(8), nullptr);
  auto h = b.conv(b.input(), "patch_embed", kDim, 32, 32, 0, 8, true, false, 8);
  h = b.flatten(h, FlattenMode::Tokens);
  for (int i = 0; i < 12; ++i) {
    const auto p = "block" + std::to_string(i);
    auto qkv = b.dense(h, p + ".qkv", 3 * kDim, 8, true, false, 8);
    MatMulAttrs scores{true, kHeads, kHeadDim, kTokens, 0, kDim};
    auto s = b.matmul(qkv, qkv, p + ".attn_qk", scores, true, 8);
    MatMulAttrs mix{false, kHeads, kTokens, kHeadDim, 0, 2 * kDim};
    auto o = b.matmul(s, qkv, p + ".attn_v", mix, false, 8);
    o = b.dense(o, p + ".proj", kDim, 8, true, false, 8);
    h = b.add(h, o, false, 8);
    auto m = b.dense(h, p + ".fc1", 4 * kDim, 8, true, true, 8);
    m = b.dense(m, p + ".fc2", kDim, 8, true, false, 8);
    h = b.add(h, m, false, 8);
  }
  h = b.dense(h, "head", 1000, 8, true, false, 8);
  return b.finish(h);
}

ValueMap randomInputs(const Graph &g, Rng &rng) {
  ValueMap out;
  for (const auto &in : g.inputs) {
    Value v;
    v.type = in.type;
    const auto n = static_cast<std::size_t>(numElements(in.type.shape));
    if (in.type.dtype == DType::Int) {
      const auto lo = quant::levelMin(in.type.quant.bits, in.type.quant.is_signed);
      const auto hi = quant::levelMax(in.type.quant.bits, in.type.quant.is_signed);
      v.ints.resize(n);
      for (auto &x : v.ints) {
        x = rng.uniformInt(lo, hi);
      }
    } else {
      v.floats.resize(n);
      for (auto &x : v.floats) {
        x = rng.uniform(-1.0, 1.0);
      }
    }
    out[in.name] = std::move(v);
  }
  return out;
}

ValueMap zeroInputs(const Graph &g) {
  ValueMap out;
  for (const auto &in : g.inputs) {
    Value v;
    v.type = in.type;
    const auto n = static_cast<std::size_t>(numElements(in.type.shape));
    if (in.type.dtype == DType::Int) {
      v.ints.assign(n, 0);
    } else {
      v.floats.assign(n, 0.0);
    }
    out[in.name] = std::move(v);
  }
  return out;
}

} // namespace cimforge::compiler
