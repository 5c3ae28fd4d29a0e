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

#include "cimforge/compiler/lowering.h"

#include "cimforge/compiler/model_io.h"
#include "cimforge/compiler/passes.h"
#include "cimforge/error.h"

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>

namespace cimforge::compiler {

using nlohmann::json;

namespace {

constexpr const char *kTraceFormat = "cimforge-trace";
constexpr int kTraceVersion = 1;

struct KindName {
  RecordKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {RecordKind::Label, "label"},
    {RecordKind::WriteTile, "write_tile"},
    {RecordKind::Mvm, "mvm"},
    {RecordKind::HostShiftAdd, "host_shift_add"},
    {RecordKind::HostRequantize, "host_requantize"},
};

RecordKind parseRecordKind(std::string_view name) {
  for (const auto &k : kKindNames) {
    if (k.name == name) {
      return k.kind;
    }
  }
  throw ParseError("unknown trace record kind '" + std::string(name) + "'");
}

/// Slices whose digit columns land in packed column image ct.
std::vector<int> slicesInImage(const LayerPlan &p, std::int64_t ct, std::int64_t cols) {
  const std::int64_t slices = static_cast<std::int64_t>(p.shifts.slice_weights.size());
  const std::int64_t used = 2 * p.desc.m_l * slices;
  std::set<int> seen;
  for (std::int64_t c = 0; c < cols; ++c) {
    const auto g = ct * cols + c;
    if (g >= used) {
      break;
    }
    seen.insert(static_cast<int>((g % (2 * slices)) / 2));
  }
  return {seen.begin(), seen.end()};
}

} // namespace

std::string_view recordKindName(RecordKind kind) {
  for (const auto &k : kKindNames) {
    if (k.kind == kind) {
      return k.name;
    }
  }
  return "label";
}

const LayerPlan *CompiledModel::findLayer(std::string_view id) const {
  for (const auto &l : layers) {
    if (l.id == id) {
      return &l;
    }
  }
  return nullptr;
}

Micros CompiledModel::predictedLatency() const {
  Micros t;
  for (const auto &l : layers) {
    t += l.predicted_latency;
  }
  return t;
}

std::vector<LayerPlan> planLayers(const Graph &program, const CimTarget &target) {
  target.validate();
  Graph g = program;
  g.sortTopologically();
  const auto descs = extractLayers(g);
  const auto config = extractConfig(g);
  std::vector<LayerPlan> plans;
  std::size_t k = 0;
  for (const auto &n : g.nodes) {
    if (!isCimOp(n.op)) {
      continue;
    }
    if (n.placement != Placement::CIM) {
      throw ValidationError("node '" + n.id + "' is not placed on the crossbar");
    }
    LayerPlan p;
    p.id = n.id;
    p.desc = descs[k];
    p.w_bit = config.layers[k].w_bit;
    p.a_bit = config.layers[k].a_bit;
    ++k;
    const auto signs = operandSigns(g, n);
    p.w_signed = signs.weight;
    p.a_signed = signs.activation;
    p.loops = schedule(p.desc, p.w_bit, p.a_bit, target);
    p.buffers = {{target.cols_m, target.rows_n}, {1, target.rows_n}, {1, target.cols_m}};
    p.shifts = xbar::shiftPlan(p.w_bit, p.a_bit, p.a_signed, target);
    const auto users = g.consumers(n.output);
    if (users.size() == 1 && users[0]->op == OpKind::Requantize && !g.isOutput(n.output)) {
      p.fused_requantize = users[0]->id;
    }
    p.predicted_latency = cost::layerLatency(p.desc, p.w_bit, p.a_bit, target);
    plans.push_back(std::move(p));
  }
  return plans;
}

std::vector<TraceRecord> emitTrace(const std::vector<LayerPlan> &layers) {
  std::vector<TraceRecord> trace;
  for (const auto &p : layers) {
    for (const auto &a : p.loops.axes) {
      TraceRecord r;
      r.kind = RecordKind::Label;
      r.layer = p.id;
      r.axis = a.label;
      r.extent = a.extent;
      r.temporal = a.temporal;
      trace.push_back(std::move(r));
    }
    const auto heads = p.loops.axis("repeat").extent;
    const auto colTiles = p.loops.axis("outer_col_tile").extent;
    const auto rowTiles = p.loops.axis("outer_row_tile").extent;
    const auto vecs = p.loops.axis("input_vec").extent;
    const auto planes = p.loops.axis("input_bit").extent;
    const auto cols = p.buffers.output[1];
    for (std::int64_t h = 0; h < heads; ++h) {
      for (std::int64_t ct = 0; ct < colTiles; ++ct) {
        const auto slices = slicesInImage(p, ct, cols);
        for (std::int64_t rt = 0; rt < rowTiles; ++rt) {
          TraceRecord w;
          w.kind = RecordKind::WriteTile;
          w.layer = p.id;
          w.head = h;
          w.col_tile = ct;
          w.row_tile = rt;
          w.slices = slices;
          trace.push_back(w);
          for (std::int64_t v = 0; v < vecs; ++v) {
            for (std::int64_t b = 0; b < planes; ++b) {
              TraceRecord m;
              m.kind = RecordKind::Mvm;
              m.layer = p.id;
              m.head = h;
              m.col_tile = ct;
              m.row_tile = rt;
              m.vec = v;
              m.bit_plane = static_cast<int>(b);
              trace.push_back(std::move(m));
            }
          }
          TraceRecord s;
          s.kind = RecordKind::HostShiftAdd;
          s.layer = p.id;
          s.head = h;
          s.col_tile = ct;
          s.row_tile = rt;
          s.plane_factors = p.shifts.plane_factors;
          s.offset_factor = p.shifts.offset_factor;
          s.slice_weights = p.shifts.slice_weights;
          trace.push_back(std::move(s));
        }
      }
    }
    if (p.fused_requantize) {
      TraceRecord r;
      r.kind = RecordKind::HostRequantize;
      r.layer = p.id;
      trace.push_back(std::move(r));
    }
  }
  return trace;
}

CompiledModel compileModel(const Graph &g, const CimTarget &target, json manifest) {
  target.validate();
  CompiledModel m;
  m.program = prepareGraph(g, target);
  m.target = target;
  m.layers = planLayers(m.program, target);
  m.trace = emitTrace(m.layers);
  for (auto &r : m.trace) {
    if (r.kind != RecordKind::HostRequantize) {
      continue;
    }
    const auto *req = m.program.findNode(*m.findLayer(r.layer)->fused_requantize);
    r.multiplier = req->multiplier;
    r.quant = *req->quant;
  }
  m.manifest = std::move(manifest);
  checkWeightStationary(m.trace);
  return m;
}

RecordCounts countRecords(const std::vector<TraceRecord> &trace, std::string_view layer) {
  RecordCounts c;
  for (const auto &r : trace) {
    if (r.layer != layer) {
      continue;
    }
    switch (r.kind) {
    case RecordKind::WriteTile:
      ++c.writes;
      break;
    case RecordKind::Mvm:
      ++c.mvms;
      break;
    case RecordKind::HostShiftAdd:
      ++c.shift_adds;
      break;
    case RecordKind::HostRequantize:
      ++c.requantizes;
      break;
    case RecordKind::Label:
      ++c.labels;
      break;
    }
  }
  return c;
}

void checkWeightStationary(const std::vector<TraceRecord> &trace) {
  // The device holds a single image at a time.
  std::optional<std::tuple<std::string, std::int64_t, std::int64_t, std::int64_t>> resident;
  for (const auto &r : trace) {
    auto key = std::make_tuple(r.layer, r.head, r.col_tile, r.row_tile);
    if (r.kind == RecordKind::WriteTile) {
      resident = std::move(key);
    } else if (r.kind == RecordKind::Mvm || r.kind == RecordKind::HostShiftAdd) {
      if (resident != key) {
        throw ValidationError("layer '" + r.layer + "': " + std::string(recordKindName(r.kind)) +
                              " before its tile was written");
      }
    }
  }
}

json recordToJson(const TraceRecord &r) {
  json j{{"kind", recordKindName(r.kind)}, {"layer", r.layer}};
  switch (r.kind) {
  case RecordKind::Label:
    j["axis"] = r.axis;
    j["extent"] = r.extent;
    j["temporal"] = r.temporal;
    break;
  case RecordKind::WriteTile:
    j["head"] = r.head;
    j["col_tile"] = r.col_tile;
    j["row_tile"] = r.row_tile;
    j["slices"] = r.slices;
    break;
  case RecordKind::Mvm:
    j["head"] = r.head;
    j["col_tile"] = r.col_tile;
    j["row_tile"] = r.row_tile;
    j["vec"] = r.vec;
    j["bit_plane"] = r.bit_plane;
    break;
  case RecordKind::HostShiftAdd:
    j["head"] = r.head;
    j["col_tile"] = r.col_tile;
    j["row_tile"] = r.row_tile;
    j["plane_factors"] = r.plane_factors;
    j["offset_factor"] = r.offset_factor;
    j["slice_weights"] = r.slice_weights;
    break;
  case RecordKind::HostRequantize:
    j["multiplier"] = r.multiplier;
    j["scale"] = r.quant.scale;
    j["bits"] = r.quant.bits;
    j["signed"] = r.quant.is_signed;
    break;
  }
  return j;
}

TraceRecord recordFromJson(const json &j) {
  TraceRecord r;
  try {
    r.kind = parseRecordKind(j.at("kind").get<std::string>());
    r.layer = j.at("layer").get<std::string>();
    switch (r.kind) {
    case RecordKind::Label:
      r.axis = j.at("axis").get<std::string>();
      r.extent = j.at("extent").get<std::int64_t>();
      r.temporal = j.at("temporal").get<bool>();
      break;
    case RecordKind::WriteTile:
      r.head = j.at("head").get<std::int64_t>();
      r.col_tile = j.at("col_tile").get<std::int64_t>();
      r.row_tile = j.at("row_tile").get<std::int64_t>();
      r.slices = j.at("slices").get<std::vector<int>>();
      break;
    case RecordKind::Mvm:
      r.head = j.at("head").get<std::int64_t>();
      r.col_tile = j.at("col_tile").get<std::int64_t>();
      r.row_tile = j.at("row_tile").get<std::int64_t>();
      r.vec = j.at("vec").get<std::int64_t>();
      r.bit_plane = j.at("bit_plane").get<int>();
      break;
    case RecordKind::HostShiftAdd:
      r.head = j.at("head").get<std::int64_t>();
      r.col_tile = j.at("col_tile").get<std::int64_t>();
      r.row_tile = j.at("row_tile").get<std::int64_t>();
      r.plane_factors = j.at("plane_factors").get<std::vector<std::int64_t>>();
      r.offset_factor = j.at("offset_factor").get<std::int64_t>();
      r.slice_weights = j.at("slice_weights").get<std::vector<std::int64_t>>();
      break;
    case RecordKind::HostRequantize:
      r.multiplier = j.at("multiplier").get<double>();
      r.quant.scale = j.at("scale").get<double>();
      r.quant.bits = j.at("bits").get<int>();
      r.quant.is_signed = j.at("signed").get<bool>();
      break;
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed trace record: ") + e.what());
  }
  return r;
}

void writeTrace(const CompiledModel &m, std::ostream &out) {
  json header{{"format", kTraceFormat},
              {"version", kTraceVersion},
              {"manifest", m.manifest},
              {"target", targetToJson(m.target)},
              {"program", modelToJson(m.program)}};
  out << header.dump() << '\n';
  for (const auto &r : m.trace) {
    out << recordToJson(r).dump() << '\n';
  }
}

void saveTrace(const CompiledModel &m, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  writeTrace(m, out);
}

CompiledModel readTrace(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("empty trace file");
  }
  CompiledModel m;
  try {
    const auto header = json::parse(line);
    if (!header.is_object() || header.value("format", std::string()) != kTraceFormat ||
        header.value("version", 0) != kTraceVersion) {
      throw ParseError(std::string("not a trace file (format must be \"") + kTraceFormat + "\")");
    }
    m.manifest = header.value("manifest", json());
    m.target = parseTarget(header.at("target"));
    m.program = parseModel(header.at("program"));
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed trace header: ") + e.what());
  }
  m.layers = planLayers(m.program, m.target);
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) {
      continue;
    }
    try {
      m.trace.push_back(recordFromJson(json::parse(line)));
    } catch (const json::exception &e) {
      throw ParseError("trace line " + std::to_string(lineNo) + ": " + e.what());
    } catch (const ParseError &e) {
      throw ParseError("trace line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  checkWeightStationary(m.trace);
  return m;
}

CompiledModel loadTrace(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  try {
    return readTrace(in);
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

} // namespace cimforge::compiler
