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

#include "cimforge/cost_model.h"

#include "cimforge/error.h"

#include <cmath>

namespace cimforge::cost {

namespace {

std::uint64_t ceilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void checkBits(int bits, const char *what) {
  if (bits < 1 || bits > 16) {
    throw ValidationError(std::string(what) + " " + std::to_string(bits) + " outside [1, 16]");
  }
}

} // namespace

std::string_view layerKindName(LayerKind kind) {
  switch (kind) {
  case LayerKind::Conv2D:
    return "Conv2D";
  case LayerKind::Dense:
    return "Dense";
  case LayerKind::MatMul:
    return "MatMul";
  }
  return "Dense";
}

GemmDims gemmDims(const ConvParams &conv) {
  return {conv.c_out, conv.c_in * conv.k_h * conv.k_w, conv.h_out * conv.w_out};
}

void LayerDesc::validate() const {
  if (m_l < 1 || n_l < 1 || v_l < 1 || r_repeat < 1) {
    throw ValidationError("layer '" + id + "': m_l, n_l, v_l and r_repeat must be ≥ 1");
  }
  if (conv) {
    if (kind != LayerKind::Conv2D) {
      throw ValidationError("layer '" + id + "': conv parameters on a non-Conv2D layer");
    }
    if (gemmDims(*conv) != GemmDims{m_l, n_l, v_l}) {
      throw ValidationError("layer '" + id + "': GEMM dimensions disagree with conv parameters");
    }
  }
  if (kind == LayerKind::Dense && !seq_len && v_l != 1) {
    throw ValidationError("layer '" + id + "': Dense layer outside a sequence must have v_l = 1");
  }
  if (seq_len && kind != LayerKind::Conv2D && v_l != *seq_len) {
    throw ValidationError("layer '" + id + "': v_l must equal the sequence length");
  }
}

LayerDesc convLayer(std::string id, const ConvParams &conv) {
  LayerDesc l;
  l.id = std::move(id);
  l.kind = LayerKind::Conv2D;
  const auto dims = gemmDims(conv);
  l.m_l = dims.m_l;
  l.n_l = dims.n_l;
  l.v_l = dims.v_l;
  l.conv = conv;
  l.validate();
  return l;
}

LayerDesc denseLayer(std::string id, std::int64_t outFeatures, std::int64_t inFeatures,
                     std::optional<std::int64_t> seqLen) {
  LayerDesc l;
  l.id = std::move(id);
  l.kind = LayerKind::Dense;
  l.m_l = outFeatures;
  l.n_l = inFeatures;
  l.v_l = seqLen.value_or(1);
  l.seq_len = seqLen;
  l.validate();
  return l;
}

LayerDesc matmulLayer(std::string id, std::int64_t rows, std::int64_t k, std::int64_t n,
                      std::int64_t repeat) {
  LayerDesc l;
  l.id = std::move(id);
  l.kind = LayerKind::MatMul;
  l.m_l = n;
  l.n_l = k;
  l.v_l = rows;
  l.seq_len = rows;
  l.r_repeat = repeat;
  l.validate();
  return l;
}

std::uint64_t nWrite(const LayerDesc &layer, int wBit, const CimTarget &target) {
  checkBits(wBit, "w_bit");
  const auto slices = ceilDiv(static_cast<std::uint64_t>(wBit),
                              static_cast<std::uint64_t>(target.r_cell));
  // (2 M_l / M) * slices, rounded up as one exact rational.
  const auto colTiles = ceilDiv(2 * static_cast<std::uint64_t>(layer.m_l) * slices,
                                static_cast<std::uint64_t>(target.cols_m));
  const auto rowTiles = ceilDiv(static_cast<std::uint64_t>(layer.n_l),
                                static_cast<std::uint64_t>(target.rows_n));
  return colTiles * rowTiles;
}

std::uint64_t nMvm(const LayerDesc &layer, int wBit, int aBit, const CimTarget &target) {
  checkBits(aBit, "a_bit");
  const auto planes = ceilDiv(static_cast<std::uint64_t>(aBit),
                              static_cast<std::uint64_t>(target.r_dac));
  return static_cast<std::uint64_t>(layer.v_l) * nWrite(layer, wBit, target) * planes;
}

Micros layerLatency(const LayerDesc &layer, int wBit, int aBit, const CimTarget &target) {
  const Micros once =
      target.t_write * nWrite(layer, wBit, target) + target.t_mvm * nMvm(layer, wBit, aBit, target);
  return once * static_cast<std::uint64_t>(layer.r_repeat);
}

Micros totalLatency(const std::vector<LayerDesc> &layers, const QuantConfig &config,
                    const CimTarget &target) {
  Micros total;
  for (const auto &layer : layers) {
    const LayerBits *bits = config.find(layer.id);
    if (bits == nullptr) {
      throw ValidationError("quant config has no entry for layer '" + layer.id + "'");
    }
    total += layerLatency(layer, bits->w_bit, bits->a_bit, target);
  }
  return total;
}

LatencyLut::LatencyLut(std::vector<std::string> layerIds, int bMin, int bMax)
    : layerIds_(std::move(layerIds)), bMin_(bMin), bMax_(bMax),
      values_(layerIds_.size() * entriesPerLayer()) {}

std::size_t LatencyLut::index(std::size_t layer, int wBit, int aBit) const {
  if (layer >= layerIds_.size() || wBit < bMin_ || wBit > bMax_ || aBit < bMin_ || aBit > bMax_) {
    throw ValidationError("latency lookup outside table: layer " + std::to_string(layer) +
                          ", w_bit " + std::to_string(wBit) + ", a_bit " + std::to_string(aBit));
  }
  const auto range = static_cast<std::size_t>(bMax_ - bMin_ + 1);
  return layer * entriesPerLayer() + static_cast<std::size_t>(wBit - bMin_) * range +
         static_cast<std::size_t>(aBit - bMin_);
}

Micros LatencyLut::at(std::size_t layer, int wBit, int aBit) const {
  return values_[index(layer, wBit, aBit)];
}

void LatencyLut::set(std::size_t layer, int wBit, int aBit, Micros value) {
  values_[index(layer, wBit, aBit)] = value;
}

LatencyLut buildLut(const std::vector<LayerDesc> &layers, const CimTarget &target) {
  std::vector<std::string> ids;
  ids.reserve(layers.size());
  for (const auto &l : layers) {
    ids.push_back(l.id);
  }
  LatencyLut lut(std::move(ids), target.b_min, target.b_max);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (int w = target.b_min; w <= target.b_max; ++w) {
      for (int a = target.b_min; a <= target.b_max; ++a) {
        lut.set(i, w, a, layerLatency(layers[i], w, a, target));
      }
    }
  }
  return lut;
}

void writeLutCsv(const LatencyLut &lut, std::ostream &out) {
  out << "layer_id,w_bit,a_bit,latency_us\n";
  for (std::size_t i = 0; i < lut.layerCount(); ++i) {
    for (int w = lut.bMin(); w <= lut.bMax(); ++w) {
      for (int a = lut.bMin(); a <= lut.bMax(); ++a) {
        out << lut.layerIds()[i] << ',' << w << ',' << a << ',' << lut.at(i, w, a).toString()
            << '\n';
      }
    }
  }
}

Score speedupAndScore(double t8b, double tQ, double acc8b, double accQ) {
  if (!(tQ > 0.0)) {
    throw ValidationError("quantized latency must be positive");
  }
  Score s;
  s.speedup = t8b / tQ;
  s.s_al = s.speedup / std::max(std::fabs(accQ - acc8b), kSalEpsilon);
  return s;
}

Score speedupAndScore(Micros t8b, Micros tQ, double acc8b, double accQ) {
  return speedupAndScore(static_cast<double>(t8b.ticks()), static_cast<double>(tQ.ticks()), acc8b,
                         accQ);
}

} // namespace cimforge::cost
