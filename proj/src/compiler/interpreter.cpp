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

#include "cimforge/compiler/interpreter.h"

#include "cimforge/error.h"
#include "cimforge/quantizer.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace cimforge::compiler {

namespace {

constexpr std::int64_t kBound = std::int64_t{1} << 31;

[[noreturn]] void overflow(const Node &n) {
  throw OverflowError("accumulator overflow at node '" + n.id + "'");
}

const std::vector<std::int32_t> &weightData(const Node &n) {
  if (!n.weight || !n.weight->data) {
    throw ValidationError("node '" + n.id + "' has no weight data (shape-only model)");
  }
  return *n.weight->data;
}

std::int64_t intBias(const Node &n, std::int64_t channel) {
  if (!n.int_bias) {
    return 0;
  }
  if (!n.int_bias->data) {
    throw ValidationError("node '" + n.id + "' has no bias data (shape-only model)");
  }
  return (*n.int_bias->data)[static_cast<std::size_t>(channel)];
}

double floatBias(const Node &n, std::int64_t channel) {
  if (!n.bias->data) {
    throw ValidationError("node '" + n.id + "' has no bias data (shape-only model)");
  }
  return (*n.bias->data)[static_cast<std::size_t>(channel)];
}

/// Accumulates one integer dot product with the crossbar overflow rule.
class IntDot {
public:
  void add(std::int64_t w, std::int64_t x) {
    sum_ += w * x;
    abs_ += std::abs(w) * std::abs(x);
  }
  std::int64_t finish(const Node &n, std::int64_t bias) const {
    if (abs_ >= kBound) {
      overflow(n);
    }
    const auto v = sum_ + bias;
    if (v < std::numeric_limits<std::int32_t>::min() ||
        v > std::numeric_limits<std::int32_t>::max()) {
      overflow(n);
    }
    return v;
  }

private:
  std::int64_t sum_ = 0;
  std::int64_t abs_ = 0;
};

Value makeValue(const TensorType &t) {
  Value v;
  v.type = t;
  if (t.dtype == DType::Int) {
    v.ints.assign(static_cast<std::size_t>(v.size()), 0);
  } else {
    v.floats.assign(static_cast<std::size_t>(v.size()), 0.0);
  }
  return v;
}

double element(const Value &v, std::size_t i) {
  return v.type.dtype == DType::Int ? static_cast<double>(v.ints[i]) : v.floats[i];
}

Value dense(const Node &n, const Value &x, const TensorType &out) {
  const auto &w = weightData(n);
  const auto m = n.weight->shape[0];
  const auto k = n.weight->shape[1];
  const auto rows = x.size() / k;
  Value y = makeValue(out);
  for (std::int64_t v = 0; v < rows; ++v) {
    for (std::int64_t o = 0; o < m; ++o) {
      const auto yi = static_cast<std::size_t>(v * m + o);
      if (n.integer) {
        IntDot dot;
        for (std::int64_t i = 0; i < k; ++i) {
          dot.add(w[static_cast<std::size_t>(o * k + i)], x.ints[static_cast<std::size_t>(v * k + i)]);
        }
        y.ints[yi] = dot.finish(n, intBias(n, o));
      } else {
        double s = 0.0;
        for (std::int64_t i = 0; i < k; ++i) {
          s += x.floats[static_cast<std::size_t>(v * k + i)] *
               (w[static_cast<std::size_t>(o * k + i)] * n.weight->quant.scale);
        }
        y.floats[yi] = s;
      }
    }
  }
  return y;
}

Value conv2d(const Node &n, const Value &x, const TensorType &out) {
  const auto &w = weightData(n);
  const auto &ws = n.weight->shape;
  const auto co = ws[0], ci = ws[1], kh = ws[2], kw = ws[3];
  const auto h = x.type.shape[1], wd = x.type.shape[2];
  const auto ho = out.shape[1], wo = out.shape[2];
  Value y = makeValue(out);
  for (std::int64_t o = 0; o < co; ++o) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        IntDot dot;
        double s = 0.0;
        for (std::int64_t c = 0; c < ci; ++c) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const auto iy = oy * n.stride.h - n.padding.h + dy;
            if (iy < 0 || iy >= h) {
              continue;
            }
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const auto ix = ox * n.stride.w - n.padding.w + dx;
              if (ix < 0 || ix >= wd) {
                continue;
              }
              const auto wi = static_cast<std::size_t>(((o * ci + c) * kh + dy) * kw + dx);
              const auto xi = static_cast<std::size_t>((c * h + iy) * wd + ix);
              if (n.integer) {
                dot.add(w[wi], x.ints[xi]);
              } else {
                s += x.floats[xi] * (w[wi] * n.weight->quant.scale);
              }
            }
          }
        }
        const auto yi = static_cast<std::size_t>((o * ho + oy) * wo + ox);
        if (n.integer) {
          y.ints[yi] = dot.finish(n, intBias(n, o));
        } else {
          y.floats[yi] = s;
        }
      }
    }
  }
  return y;
}

Value matmul(const Node &n, const Value &a, const Value &b, const TensorType &out) {
  const auto &mm = n.matmul;
  const auto rows = a.type.shape[0];
  const auto aCols = a.type.shape[1];
  const auto bCols = b.type.shape[1];
  const auto outCols = mm.heads * mm.n;
  Value y = makeValue(out);
  for (std::int64_t h = 0; h < mm.heads; ++h) {
    for (std::int64_t v = 0; v < rows; ++v) {
      for (std::int64_t j = 0; j < mm.n; ++j) {
        IntDot dot;
        double s = 0.0;
        for (std::int64_t t = 0; t < mm.k; ++t) {
          const auto ai = static_cast<std::size_t>(v * aCols + mm.a_offset + h * mm.k + t);
          const auto bi = mm.transpose_b
                              ? static_cast<std::size_t>(j * bCols + mm.b_offset + h * mm.k + t)
                              : static_cast<std::size_t>(t * bCols + mm.b_offset + h * mm.n + j);
          if (n.integer) {
            dot.add(b.ints[bi], a.ints[ai]);
          } else {
            s += a.floats[ai] * b.floats[bi];
          }
        }
        const auto yi = static_cast<std::size_t>(v * outCols + h * mm.n + j);
        if (n.integer) {
          y.ints[yi] = dot.finish(n, 0);
        } else {
          y.floats[yi] = s;
        }
      }
    }
  }
  return y;
}

std::int64_t quantizeOne(double x, const QuantParams &q) {
  const double r = quant::roundHalfAway(x / q.scale);
  const auto hi = static_cast<double>(quant::levelMax(q.bits, q.is_signed));
  const auto lo = static_cast<double>(quant::levelMin(q.bits, q.is_signed));
  return static_cast<std::int64_t>(std::clamp(r, lo, hi));
}

Value maxPool(const Node &n, const Value &x, const TensorType &out) {
  const auto c = x.type.shape[0], h = x.type.shape[1], w = x.type.shape[2];
  const auto ho = out.shape[1], wo = out.shape[2];
  Value y = makeValue(out);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        bool first = true;
        std::int64_t bestI = 0;
        double bestF = 0.0;
        for (std::int64_t dy = 0; dy < n.kernel.h; ++dy) {
          const auto iy = oy * n.stride.h - n.padding.h + dy;
          if (iy < 0 || iy >= h) {
            continue;
          }
          for (std::int64_t dx = 0; dx < n.kernel.w; ++dx) {
            const auto ix = ox * n.stride.w - n.padding.w + dx;
            if (ix < 0 || ix >= w) {
              continue;
            }
            const auto xi = static_cast<std::size_t>((ch * h + iy) * w + ix);
            if (n.integer) {
              bestI = first ? x.ints[xi] : std::max(bestI, x.ints[xi]);
            } else {
              bestF = first ? x.floats[xi] : std::max(bestF, x.floats[xi]);
            }
            first = false;
          }
        }
        const auto yi = static_cast<std::size_t>((ch * ho + oy) * wo + ox);
        if (n.integer) {
          y.ints[yi] = bestI;
        } else {
          y.floats[yi] = bestF;
        }
      }
    }
  }
  return y;
}

Value flatten(const Node &n, const Value &x, const TensorType &out) {
  if (n.flatten == FlattenMode::Flatten) {
    Value y = x;
    y.type = out;
    return y;
  }
  const auto c = x.type.shape[0];
  const auto p = x.type.shape[1] * x.type.shape[2];
  Value y = makeValue(out);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < p; ++i) {
      const auto src = static_cast<std::size_t>(ch * p + i);
      const auto dst = static_cast<std::size_t>(i * c + ch);
      if (n.integer) {
        y.ints[dst] = x.ints[src];
      } else {
        y.floats[dst] = x.floats[src];
      }
    }
  }
  return y;
}

} // namespace

void checkInputs(const Graph &g, const ValueMap &inputs) {
  for (const auto &in : g.inputs) {
    auto it = inputs.find(in.name);
    if (it == inputs.end()) {
      throw ValidationError("missing input tensor '" + in.name + "'");
    }
    const auto &v = it->second;
    if (v.type.shape != in.type.shape || v.type.dtype != in.type.dtype) {
      throw ValidationError("input '" + in.name + "': shape mismatch, expected " +
                            shapeToString(in.type.shape) + ", got " +
                            shapeToString(v.type.shape));
    }
    if (v.type.dtype == DType::Int) {
      if (v.type.quant != in.type.quant) {
        throw ValidationError("input '" + in.name + "': quantization parameters differ");
      }
      const auto hi = quant::levelMax(in.type.quant.bits, in.type.quant.is_signed);
      const auto lo = quant::levelMin(in.type.quant.bits, in.type.quant.is_signed);
      if (static_cast<std::int64_t>(v.ints.size()) != v.size()) {
        throw ValidationError("input '" + in.name + "': data size does not match shape");
      }
      for (auto x : v.ints) {
        if (x < lo || x > hi) {
          throw ValidationError("input '" + in.name + "': value " + std::to_string(x) +
                                " outside the declared range");
        }
      }
    } else if (static_cast<std::int64_t>(v.floats.size()) != v.size()) {
      throw ValidationError("input '" + in.name + "': data size does not match shape");
    }
  }
}

Value evaluateNode(const Node &n, std::span<const Value *const> in, const TensorType &out) {
  switch (n.op) {
  case OpKind::Dense:
    return dense(n, *in[0], out);
  case OpKind::Conv2D:
    return conv2d(n, *in[0], out);
  case OpKind::MatMul:
    return matmul(n, *in[0], *in[1], out);
  case OpKind::Quantize: {
    Value y = makeValue(out);
    for (std::size_t i = 0; i < y.ints.size(); ++i) {
      y.ints[i] = quantizeOne(in[0]->floats[i], *n.quant);
    }
    return y;
  }
  case OpKind::Dequantize: {
    Value y = makeValue(out);
    for (std::size_t i = 0; i < y.floats.size(); ++i) {
      y.floats[i] = static_cast<double>(in[0]->ints[i]) * in[0]->type.quant.scale;
    }
    return y;
  }
  case OpKind::Requantize: {
    Value y = makeValue(out);
    for (std::size_t i = 0; i < y.ints.size(); ++i) {
      y.ints[i] = quant::requantizeValue(in[0]->ints[i], n.multiplier, n.quant->bits,
                                         n.quant->is_signed);
    }
    return y;
  }
  case OpKind::BiasAdd: {
    Value y = *in[0];
    y.type = out;
    const auto &s = out.shape;
    const auto channels = s.size() == 3 ? s[0] : s.back();
    const auto inner = s.size() == 3 ? s[1] * s[2] : 1;
    for (std::size_t i = 0; i < y.floats.size(); ++i) {
      const auto idx = static_cast<std::int64_t>(i);
      const auto ch = s.size() == 3 ? idx / inner : idx % channels;
      y.floats[i] += floatBias(n, ch);
    }
    return y;
  }
  case OpKind::ReLU: {
    Value y = *in[0];
    y.type = out;
    for (auto &v : y.ints) {
      v = std::max<std::int64_t>(v, 0);
    }
    for (auto &v : y.floats) {
      v = std::max(v, 0.0);
    }
    return y;
  }
  case OpKind::Add: {
    Value y = makeValue(out);
    for (std::size_t i = 0; i < static_cast<std::size_t>(y.size()); ++i) {
      if (n.integer) {
        const auto a = quant::roundHalfAway(static_cast<double>(in[0]->ints[i]) * n.add_multipliers[0]);
        const auto b = quant::roundHalfAway(static_cast<double>(in[1]->ints[i]) * n.add_multipliers[1]);
        const double s = a + b;
        if (s < std::numeric_limits<std::int32_t>::min() ||
            s > std::numeric_limits<std::int32_t>::max()) {
          overflow(n);
        }
        y.ints[i] = static_cast<std::int64_t>(s);
      } else {
        y.floats[i] = element(*in[0], i) + element(*in[1], i);
      }
    }
    return y;
  }
  case OpKind::Flatten:
    return flatten(n, *in[0], out);
  case OpKind::MaxPool:
    return maxPool(n, *in[0], out);
  }
  throw ValidationError("node '" + n.id + "': unsupported op");
}

ValueMap evaluate(const Graph &g, const ValueMap &inputs, bool keepAll) {
  const auto types = g.inferTypes();
  checkInputs(g, inputs);
  Graph sorted = g;
  sorted.sortTopologically();
  ValueMap env;
  for (const auto &in : g.inputs) {
    env[in.name] = inputs.at(in.name);
  }
  for (const auto &n : sorted.nodes) {
    std::vector<const Value *> args;
    for (const auto &t : n.inputs) {
      args.push_back(&env.at(t));
    }
    env[n.output] = evaluateNode(n, args, types.at(n.output));
  }
  if (keepAll) {
    return env;
  }
  ValueMap out;
  for (const auto &o : g.outputs) {
    out[o] = env.at(o);
  }
  return out;
}

GemmOperands gemmOperands(const Node &n, std::span<const Value *const> in, std::int64_t head) {
  GemmOperands g;
  const Value &x = *in[0];
  switch (n.op) {
  case OpKind::Dense: {
    const auto &w = weightData(n);
    g.m_l = n.weight->shape[0];
    g.n_l = n.weight->shape[1];
    g.v_l = x.size() / g.n_l;
    g.weights.resize(static_cast<std::size_t>(g.n_l * g.m_l));
    for (std::int64_t o = 0; o < g.m_l; ++o) {
      for (std::int64_t i = 0; i < g.n_l; ++i) {
        g.weights[static_cast<std::size_t>(i * g.m_l + o)] = w[static_cast<std::size_t>(o * g.n_l + i)];
      }
    }
    g.inputs.assign(x.ints.begin(), x.ints.end());
    break;
  }
  case OpKind::Conv2D: {
    const auto &w = weightData(n);
    const auto &ws = n.weight->shape;
    const auto co = ws[0], ci = ws[1], kh = ws[2], kw = ws[3];
    const auto h = x.type.shape[1], wd = x.type.shape[2];
    const auto ho = (h + 2 * n.padding.h - kh) / n.stride.h + 1;
    const auto wo = (wd + 2 * n.padding.w - kw) / n.stride.w + 1;
    g.m_l = co;
    g.n_l = ci * kh * kw;
    g.v_l = ho * wo;
    g.weights.resize(static_cast<std::size_t>(g.n_l * g.m_l));
    for (std::int64_t o = 0; o < co; ++o) {
      for (std::int64_t r = 0; r < g.n_l; ++r) {
        g.weights[static_cast<std::size_t>(r * g.m_l + o)] = w[static_cast<std::size_t>(o * g.n_l + r)];
      }
    }
    g.inputs.assign(static_cast<std::size_t>(g.v_l * g.n_l), 0);
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const auto v = oy * wo + ox;
        for (std::int64_t c = 0; c < ci; ++c) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const auto iy = oy * n.stride.h - n.padding.h + dy;
              const auto ix = ox * n.stride.w - n.padding.w + dx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) {
                continue;
              }
              const auto r = (c * kh + dy) * kw + dx;
              g.inputs[static_cast<std::size_t>(v * g.n_l + r)] =
                  static_cast<std::int32_t>(x.ints[static_cast<std::size_t>((c * h + iy) * wd + ix)]);
            }
          }
        }
      }
    }
    break;
  }
  case OpKind::MatMul: {
    const Value &b = *in[1];
    const auto &mm = n.matmul;
    const auto aCols = x.type.shape[1];
    const auto bCols = b.type.shape[1];
    g.n_l = mm.k;
    g.m_l = mm.n;
    g.v_l = x.type.shape[0];
    g.weights.resize(static_cast<std::size_t>(g.n_l * g.m_l));
    for (std::int64_t t = 0; t < mm.k; ++t) {
      for (std::int64_t j = 0; j < mm.n; ++j) {
        const auto bi = mm.transpose_b ? j * bCols + mm.b_offset + head * mm.k + t
                                       : t * bCols + mm.b_offset + head * mm.n + j;
        g.weights[static_cast<std::size_t>(t * g.m_l + j)] =
            static_cast<std::int32_t>(b.ints[static_cast<std::size_t>(bi)]);
      }
    }
    g.inputs.resize(static_cast<std::size_t>(g.v_l * g.n_l));
    for (std::int64_t v = 0; v < g.v_l; ++v) {
      for (std::int64_t t = 0; t < mm.k; ++t) {
        g.inputs[static_cast<std::size_t>(v * g.n_l + t)] = static_cast<std::int32_t>(
            x.ints[static_cast<std::size_t>(v * aCols + mm.a_offset + head * mm.k + t)]);
      }
    }
    break;
  }
  default:
    throw ValidationError("node '" + n.id + "' is not a crossbar op");
  }
  return g;
}

void scatterGemmResult(const Node &n, std::int64_t head, std::span<const std::int64_t> result,
                       std::int64_t vL, std::int64_t mL, Value &out) {
  for (std::int64_t v = 0; v < vL; ++v) {
    for (std::int64_t m = 0; m < mL; ++m) {
      const auto r = result[static_cast<std::size_t>(v * mL + m)];
      std::int64_t dst = 0;
      if (n.op == OpKind::Conv2D) {
        dst = m * vL + v;
      } else if (n.op == OpKind::MatMul) {
        dst = v * n.matmul.heads * n.matmul.n + head * n.matmul.n + m;
      } else {
        dst = v * mL + m;
      }
      out.ints[static_cast<std::size_t>(dst)] = r;
    }
  }
}

} // namespace cimforge::compiler
