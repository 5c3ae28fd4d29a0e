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
#include "cimforge/compiler/schedule.h"
#include "cimforge/cost_model.h"
#include "cimforge/micros.h"
#include "cimforge/target.h"
#include "cimforge/xbar_sim.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cimforge::compiler {

enum class RecordKind { Label, WriteTile, Mvm, HostShiftAdd, HostRequantize };

std::string_view recordKindName(RecordKind kind);

/// One device trace record. Which fields matter depends on the kind:
///  label            axis, extent, temporal
///  write_tile       head, col_tile, row_tile, slices
///  mvm              head, col_tile, row_tile, vec, bit_plane
///  host_shift_add   head, col_tile, row_tile, plane_factors, offset_factor,
///                   slice_weights
///  host_requantize  multiplier, quant
struct TraceRecord {
  RecordKind kind = RecordKind::Label;
  std::string layer;
  std::string axis;
  std::int64_t extent = 0;
  bool temporal = true;
  std::int64_t head = 0;
  std::int64_t col_tile = 0;
  std::int64_t row_tile = 0;
  std::vector<int> slices;
  std::int64_t vec = 0;
  int bit_plane = 0;
  std::vector<std::int64_t> plane_factors;
  std::int64_t offset_factor = 0;
  std::vector<std::int64_t> slice_weights;
  double multiplier = 1.0;
  QuantParams quant;
  bool operator==(const TraceRecord &) const = default;
};

/// Host staging buffers of one layer: weights M x N, inputs 1 x N, outputs
/// 1 x M.
struct StagingBuffers {
  Shape weights;
  Shape input;
  Shape output;
  bool operator==(const StagingBuffers &) const = default;
};

struct LayerPlan {
  std::string id;
  cost::LayerDesc desc;
  int w_bit = 8;
  int a_bit = 8;
  bool w_signed = true;
  bool a_signed = true;
  LoopNest loops;
  StagingBuffers buffers;
  xbar::ShiftPlan shifts;
  /// Host Requantize node folded into this layer's host_requantize record.
  std::optional<std::string> fused_requantize;
  Micros predicted_latency;
};

/// Integer host program plus the device trace that executes its CIM nodes.
struct CompiledModel {
  Graph program;
  CimTarget target;
  std::vector<LayerPlan> layers;
  std::vector<TraceRecord> trace;
  nlohmann::json manifest;

  const LayerPlan *findLayer(std::string_view id) const;
  Micros predictedLatency() const;
};

/// Per-layer plans of a prepared graph, in program order.
std::vector<LayerPlan> planLayers(const Graph &program, const CimTarget &target);

/// Expands every layer's loop nest into records: labels, then per repeat,
/// column tile and row tile one write_tile, V_l * planes mvm records and a
/// host_shift_add; a host_requantize closes the layer when the following
/// Requantize is fused.
std::vector<TraceRecord> emitTrace(const std::vector<LayerPlan> &layers);

/// Runs the pass pipeline, plans and lowers. The graph may be in QDQ form.
CompiledModel compileModel(const Graph &g, const CimTarget &target,
                           nlohmann::json manifest = nullptr);

/// Record counts of one layer in a trace.
struct RecordCounts {
  std::uint64_t writes = 0;
  std::uint64_t mvms = 0;
  std::uint64_t shift_adds = 0;
  std::uint64_t requantizes = 0;
  std::uint64_t labels = 0;
};
RecordCounts countRecords(const std::vector<TraceRecord> &trace, std::string_view layer);

/// Throws ValidationError when an mvm refers to a tile that is not the
/// most recently written one of its layer.
void checkWeightStationary(const std::vector<TraceRecord> &trace);

nlohmann::json recordToJson(const TraceRecord &r);
TraceRecord recordFromJson(const nlohmann::json &j);

/// JSON Lines: a header object (format, version, manifest, target, program)
/// followed by one record per line.
void writeTrace(const CompiledModel &m, std::ostream &out);
void saveTrace(const CompiledModel &m, const std::filesystem::path &path);
CompiledModel readTrace(std::istream &in);
CompiledModel loadTrace(const std::filesystem::path &path);

} // namespace cimforge::compiler
