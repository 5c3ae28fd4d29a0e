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

#include "cimforge/micros.h"
#include "cimforge/quant_config.h"
#include "cimforge/target.h"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cimforge::cost {

enum class LayerKind { Conv2D, Dense, MatMul };

std::string_view layerKindName(LayerKind kind);

struct ConvParams {
  std::int64_t c_in = 1;
  std::int64_t c_out = 1;
  std::int64_t k_h = 1;
  std::int64_t k_w = 1;
  std::int64_t h_out = 1;
  std::int64_t w_out = 1;

  bool operator==(const ConvParams &) const = default;
};

/// (M_l, N_l, V_l) of a layer expressed as a GEMM.
struct GemmDims {
  std::int64_t m_l = 1;
  std::int64_t n_l = 1;
  std::int64_t v_l = 1;

  bool operator==(const GemmDims &) const = default;
};

/// im2col view of a convolution: (C_out, C_in K_H K_W, H_out W_out).
GemmDims gemmDims(const ConvParams &conv);

/// A crossbar-mapped layer. m_l output columns, n_l reduction rows, v_l
/// input vectors, repeated r_repeat times (e.g. once per attention head).
struct LayerDesc {
  std::string id;
  LayerKind kind = LayerKind::Dense;
  std::int64_t m_l = 1;
  std::int64_t n_l = 1;
  std::int64_t v_l = 1;
  std::int64_t r_repeat = 1;
  std::optional<ConvParams> conv;
  std::optional<std::int64_t> seq_len;

  void validate() const;
  bool operator==(const LayerDesc &) const = default;
};

LayerDesc convLayer(std::string id, const ConvParams &conv);
/// Dense layer; with a sequence length the layer processes one vector per
/// token, otherwise a single vector.
LayerDesc denseLayer(std::string id, std::int64_t outFeatures, std::int64_t inFeatures,
                     std::optional<std::int64_t> seqLen = std::nullopt);
/// Activation-activation product; the second operand (k x n) is stationary.
LayerDesc matmulLayer(std::string id, std::int64_t rows, std::int64_t k, std::int64_t n,
                      std::int64_t repeat = 1);

/// Crossbar writes per layer execution:
/// ceil((2 M_l / M) * ceil(w_bit / r_cell)) * ceil(N_l / N).
std::uint64_t nWrite(const LayerDesc &layer, int wBit, const CimTarget &target);

/// MVM cycles per layer execution: V_l * n_write * ceil(a_bit / r_dac).
std::uint64_t nMvm(const LayerDesc &layer, int wBit, int aBit, const CimTarget &target);

/// r_repeat * (n_write * t_write + n_mvm * t_mvm).
Micros layerLatency(const LayerDesc &layer, int wBit, int aBit, const CimTarget &target);

/// Sum of layer latencies. Throws ValidationError if a layer has no bits
/// in the config.
Micros totalLatency(const std::vector<LayerDesc> &layers, const QuantConfig &config,
                    const CimTarget &target);

/// Per-layer latency for every (w_bit, a_bit) in [b_min, b_max]^2.
class LatencyLut {
public:
  LatencyLut() = default;
  LatencyLut(std::vector<std::string> layerIds, int bMin, int bMax);

  Micros at(std::size_t layer, int wBit, int aBit) const;
  void set(std::size_t layer, int wBit, int aBit, Micros value);

  std::size_t layerCount() const { return layerIds_.size(); }
  const std::vector<std::string> &layerIds() const { return layerIds_; }
  int bMin() const { return bMin_; }
  int bMax() const { return bMax_; }
  std::size_t entriesPerLayer() const {
    return static_cast<std::size_t>((bMax_ - bMin_ + 1) * (bMax_ - bMin_ + 1));
  }

private:
  std::size_t index(std::size_t layer, int wBit, int aBit) const;

  std::vector<std::string> layerIds_;
  int bMin_ = 2;
  int bMax_ = 8;
  std::vector<Micros> values_;
};

LatencyLut buildLut(const std::vector<LayerDesc> &layers, const CimTarget &target);

/// CSV with header "layer_id,w_bit,a_bit,latency_us".
void writeLutCsv(const LatencyLut &lut, std::ostream &out);

/// Accuracy loss below this (in percent) is treated as this value when
/// computing the S/AL score.
inline constexpr double kSalEpsilon = 0.001;

struct Score {
  double speedup = 1.0;
  double s_al = 0.0;
};

/// speedup = T_8b / T_q, S/AL = speedup / max(|acc_q - acc_8b|, epsilon).
Score speedupAndScore(double t8b, double tQ, double acc8b, double accQ);
Score speedupAndScore(Micros t8b, Micros tQ, double acc8b, double accQ);

} // namespace cimforge::cost
