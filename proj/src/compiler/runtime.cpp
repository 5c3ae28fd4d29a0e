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

#include "cimforge/compiler/runtime.h"

#include "cimforge/compiler/interpreter.h"
#include "cimforge/error.h"
#include "cimforge/quantizer.h"
#include "cimforge/xbar_sim.h"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <optional>
#include <set>

namespace cimforge::compiler {

namespace {

constexpr std::int64_t kBound = std::int64_t{1} << 31;

struct PlaneOutput {
  std::int64_t vec = 0;
  int plane = 0;
  std::vector<std::int64_t> columns;
};

/// Replays one layer's records on the shared crossbar.
class LayerExecutor {
public:
  LayerExecutor(const Node &node, const LayerPlan &plan, std::vector<const Value *> args,
                const TensorType &accType, xbar::Crossbar &xb)
      : node_(node), plan_(plan), args_(std::move(args)), xb_(xb) {
    acc_.type = accType;
    acc_.ints.assign(static_cast<std::size_t>(acc_.size()), 0);
  }

  void apply(const TraceRecord &r) {
    switch (r.kind) {
    case RecordKind::Label:
      if (plan_.loops.axis(r.axis).extent != r.extent) {
        fail("label '" + r.axis + "' disagrees with the layer's schedule");
      }
      break;
    case RecordKind::WriteTile:
      write(r);
      break;
    case RecordKind::Mvm:
      mvm(r);
      break;
    case RecordKind::HostShiftAdd:
      shiftAdd(r);
      break;
    case RecordKind::HostRequantize:
      requantize(r);
      break;
    }
  }

  const Value &accumulator() {
    finishHead();
    if (headsDone_ != plan_.loops.axis("repeat").extent) {
      fail("trace covers " + std::to_string(headsDone_) + " of " +
           std::to_string(plan_.loops.axis("repeat").extent) + " repeats");
    }
    return acc_;
  }

  const std::optional<Value> &requantized() const { return requantized_; }

private:
  [[noreturn]] void fail(const std::string &msg) const {
    throw ValidationError("layer '" + plan_.id + "': " + msg);
  }

  void startHead(std::int64_t head) {
    if (head != headsDone_) {
      fail("repeat " + std::to_string(head) + " out of order");
    }
    head_ = head;
    ops_ = gemmOperands(node_, args_, head);
    xbar::IntMatrix w(ops_.n_l, ops_.m_l);
    w.values = ops_.weights;
    const auto range = plan_.w_signed ? xbar::OperandRange::Signed : xbar::OperandRange::Unsigned;
    packed_ = xbar::packWeights(w, plan_.w_bit, xb_.target(), range);
    planes_.assign(static_cast<std::size_t>(ops_.v_l), std::nullopt);
    headAcc_.assign(static_cast<std::size_t>(ops_.v_l * ops_.m_l), 0);
    shiftAdds_ = 0;
  }

  void finishHead() {
    if (head_ < 0) {
      return;
    }
    const auto tiles = packed_.col_tiles * packed_.row_tiles;
    if (shiftAdds_ != tiles) {
      fail("repeat " + std::to_string(head_) + " shift-added " + std::to_string(shiftAdds_) +
           " of " + std::to_string(tiles) + " tiles");
    }
    const auto m = ops_.m_l;
    const auto n = ops_.n_l;
    std::vector<std::int64_t> result(headAcc_.size());
    for (std::int64_t v = 0; v < ops_.v_l; ++v) {
      const auto *x = &ops_.inputs[static_cast<std::size_t>(v * n)];
      std::int64_t maxAbs = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        maxAbs = std::max<std::int64_t>(maxAbs, std::abs(static_cast<std::int64_t>(x[j])));
      }
      for (std::int64_t k = 0; k < m; ++k) {
        if (packed_.abs_column_sums[static_cast<std::size_t>(k)] * maxAbs >= kBound) {
          std::int64_t exact = 0;
          for (std::int64_t j = 0; j < n; ++j) {
            exact += std::abs(static_cast<std::int64_t>(ops_.weights[static_cast<std::size_t>(j * m + k)])) *
                     std::abs(static_cast<std::int64_t>(x[j]));
          }
          if (exact >= kBound) {
            throw OverflowError("accumulator overflow at node '" + node_.id + "'");
          }
        }
        const auto i = static_cast<std::size_t>(v * m + k);
        std::int64_t value = headAcc_[i];
        if (node_.int_bias) {
          value += (*node_.int_bias->data)[static_cast<std::size_t>(k)];
        }
        if (value < std::numeric_limits<std::int32_t>::min() ||
            value > std::numeric_limits<std::int32_t>::max()) {
          throw OverflowError("accumulator overflow at node '" + node_.id + "'");
        }
        result[i] = value;
      }
    }
    scatterGemmResult(node_, head_, result, ops_.v_l, m, acc_);
    ++headsDone_;
    head_ = -1;
    resident_.reset();
  }

  void write(const TraceRecord &r) {
    if (r.head != head_) {
      finishHead();
      startHead(r.head);
    }
    if (r.col_tile < 0 || r.col_tile >= packed_.col_tiles || r.row_tile < 0 ||
        r.row_tile >= packed_.row_tiles) {
      fail("tile (" + std::to_string(r.col_tile) + ", " + std::to_string(r.row_tile) +
           ") outside the packed weights");
    }
    if (!pending_.empty()) {
      fail("tile rewritten before its shift-add");
    }
    const auto &tile = packed_.tile(r.col_tile, r.row_tile);
    xb_.write(tile.g_pos, tile.g_neg);
    resident_ = {r.col_tile, r.row_tile};
  }

  const xbar::PackedTile &residentTile(const TraceRecord &r) const {
    if (r.head != head_ || !resident_ || resident_->first != r.col_tile ||
        resident_->second != r.row_tile) {
      fail(std::string(recordKindName(r.kind)) + " on a tile that is not resident");
    }
    return packed_.tile(r.col_tile, r.row_tile);
  }

  void mvm(const TraceRecord &r) {
    const auto &tile = residentTile(r);
    if (r.vec < 0 || r.vec >= ops_.v_l || r.bit_plane < 0 ||
        r.bit_plane >= static_cast<int>(plan_.shifts.plane_factors.size())) {
      fail("mvm index out of range");
    }
    auto &planes = planes_[static_cast<std::size_t>(r.vec)];
    if (!planes) {
      std::span<const std::int32_t> x(&ops_.inputs[static_cast<std::size_t>(r.vec * ops_.n_l)],
                                      static_cast<std::size_t>(ops_.n_l));
      planes = xbar::sliceInput(x, plan_.a_bit, plan_.a_signed, xb_.target().r_dac);
    }
    const auto &plane = planes->planes[static_cast<std::size_t>(r.bit_plane)];
    std::vector<std::uint8_t> staged(static_cast<std::size_t>(xb_.target().rows_n), 0);
    std::copy_n(plane.begin() + tile.row_begin, tile.row_count, staged.begin());
    pending_.push_back({r.vec, r.bit_plane, xb_.mvm(staged)});
  }

  void shiftAdd(const TraceRecord &r) {
    const auto &tile = residentTile(r);
    if (r.plane_factors.size() != plan_.shifts.plane_factors.size() ||
        r.slice_weights != packed_.slice_weights) {
      fail("shift amounts disagree with the layer's bit slicing");
    }
    const auto expected = static_cast<std::size_t>(ops_.v_l) * r.plane_factors.size();
    if (pending_.size() != expected) {
      fail("tile shift-added after " + std::to_string(pending_.size()) + " of " +
           std::to_string(expected) + " mvm cycles");
    }
    const auto m = static_cast<std::size_t>(ops_.m_l);
    std::set<std::int64_t> vecs;
    for (const auto &p : pending_) {
      std::span<std::int64_t> acc(&headAcc_[static_cast<std::size_t>(p.vec) * m], m);
      xbar::accumulatePacked(packed_, tile, p.columns,
                             r.plane_factors[static_cast<std::size_t>(p.plane)], acc);
      vecs.insert(p.vec);
    }
    if (r.offset_factor != 0) {
      for (auto v : vecs) {
        std::span<std::int64_t> acc(&headAcc_[static_cast<std::size_t>(v) * m], m);
        xbar::applyOffsetCorrection(packed_, tile, r.offset_factor, acc);
      }
    }
    pending_.clear();
    ++shiftAdds_;
  }

  void requantize(const TraceRecord &r) {
    if (!plan_.fused_requantize) {
      fail("host_requantize without a fused Requantize");
    }
    const auto &acc = accumulator();
    Value out;
    out.type = {acc.type.shape, DType::Int, r.quant};
    out.ints.resize(acc.ints.size());
    for (std::size_t i = 0; i < acc.ints.size(); ++i) {
      out.ints[i] = quant::requantizeValue(acc.ints[i], r.multiplier, r.quant.bits,
                                           r.quant.is_signed);
    }
    requantized_ = std::move(out);
  }

  const Node &node_;
  const LayerPlan &plan_;
  std::vector<const Value *> args_;
  xbar::Crossbar &xb_;

  std::int64_t head_ = -1;
  std::int64_t headsDone_ = 0;
  GemmOperands ops_;
  xbar::PackedWeights packed_;
  std::vector<std::optional<xbar::BitPlanes>> planes_;
  std::vector<std::int64_t> headAcc_;
  std::optional<std::pair<std::int64_t, std::int64_t>> resident_;
  std::vector<PlaneOutput> pending_;
  std::int64_t shiftAdds_ = 0;
  Value acc_;
  std::optional<Value> requantized_;
};

} // namespace

RunResult runInference(const CompiledModel &model, const ValueMap &inputs) {
  Graph prog = model.program;
  prog.sortTopologically();
  const auto types = prog.inferTypes();
  checkInputs(prog, inputs);

  std::set<std::string> fused;
  for (const auto &l : model.layers) {
    if (l.fused_requantize) {
      fused.insert(*l.fused_requantize);
    }
  }

  xbar::Crossbar xb(model.target);
  ValueMap env;
  for (const auto &in : prog.inputs) {
    env[in.name] = inputs.at(in.name);
  }
  RunResult result;
  std::size_t cursor = 0;
  const auto &trace = model.trace;
  for (const auto &n : prog.nodes) {
    if (fused.count(n.id)) {
      continue;
    }
    std::vector<const Value *> args;
    for (const auto &t : n.inputs) {
      args.push_back(&env.at(t));
    }
    if (n.placement != Placement::CIM) {
      env[n.output] = evaluateNode(n, args, types.at(n.output));
      continue;
    }
    const LayerPlan *plan = model.findLayer(n.id);
    if (!plan) {
      throw ValidationError("no layer plan for CIM node '" + n.id + "'");
    }
    if (cursor >= trace.size() || trace[cursor].layer != n.id) {
      throw ValidationError("trace has no records for layer '" + n.id + "' at this point");
    }
    const auto writes0 = xb.writeCount();
    const auto mvms0 = xb.mvmCount();
    LayerExecutor exec(n, *plan, args, types.at(n.output), xb);
    while (cursor < trace.size() && trace[cursor].layer == n.id) {
      exec.apply(trace[cursor++]);
    }
    env[n.output] = exec.accumulator();
    if (plan->fused_requantize) {
      if (!exec.requantized()) {
        throw ValidationError("layer '" + n.id + "': missing host_requantize record");
      }
      env[prog.findNode(*plan->fused_requantize)->output] = *exec.requantized();
    }
    LayerMeasurement m;
    m.id = n.id;
    m.writes = xb.writeCount() - writes0;
    m.mvms = xb.mvmCount() - mvms0;
    m.latency = model.target.t_write * m.writes + model.target.t_mvm * m.mvms;
    result.latency += m.latency;
    result.writes += m.writes;
    result.mvms += m.mvms;
    result.layers.push_back(std::move(m));
  }
  if (cursor != trace.size()) {
    throw ValidationError("trace record for layer '" + trace[cursor].layer +
                          "' does not match the program");
  }
  for (const auto &o : prog.outputs) {
    result.outputs[o] = env.at(o);
  }
  return result;
}

} // namespace cimforge::compiler
