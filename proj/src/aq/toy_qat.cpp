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

#include "cimforge/aq/toy_qat.h"

#include "cimforge/error.h"
#include "cimforge/quantizer.h"
#include "cimforge/rng.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace cimforge::aq {

namespace {

/// Per-layer bit widths; nullopt trains and evaluates in float.
struct LayerQuant {
  int w_bit = 8;
  int a_bit = 8;
};
using QuantPlan = std::optional<std::vector<LayerQuant>>;

class Net {
public:
  Net(std::vector<int> sizes, std::vector<double> params)
      : sizes_(std::move(sizes)), params_(std::move(params)) {
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
    }
    if (params_.size() != off) {
      params_.assign(off, 0.0);
    }
  }

  static std::size_t paramCount(const std::vector<int> &sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      n += static_cast<std::size_t>(sizes[l] * sizes[l + 1] + sizes[l + 1]);
    }
    return n;
  }

  std::size_t layers() const { return sizes_.size() - 1; }
  std::vector<double> &params() { return params_; }

  /// Forward pass over a batch. inputs[l] holds the (fake-quantized) input
  /// of layer l, pre[l] its pre-activation.
  struct Pass {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> weights;
  };

  Pass forward(const double *x, std::size_t rows, const QuantPlan &plan) const {
    Pass p;
    std::vector<double> cur(x, x + rows * static_cast<std::size_t>(sizes_[0]));
    for (std::size_t l = 0; l < layers(); ++l) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      std::vector<double> w(params_.begin() + static_cast<std::ptrdiff_t>(offsets_[l]),
                            params_.begin() + static_cast<std::ptrdiff_t>(offsets_[l] + in * out));
      if (plan) {
        const auto &q = (*plan)[l];
        w = quant::fakeQuantForward(w, q.w_bit, true);
        cur = quant::fakeQuantForward(cur, q.a_bit, l == 0);
      }
      const double *b = &params_[offsets_[l] + in * out];
      std::vector<double> z(rows * out);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          double s = b[o];
          for (std::size_t i = 0; i < in; ++i) {
            s += w[o * in + i] * cur[r * in + i];
          }
          z[r * out + o] = s;
        }
      }
      p.inputs.push_back(std::move(cur));
      p.weights.push_back(std::move(w));
      cur = z;
      if (l + 1 < layers()) {
        for (auto &v : cur) {
          v = std::max(0.0, v);
        }
      }
      p.pre.push_back(std::move(z));
    }
    return p;
  }

  /// Softmax cross-entropy SGD step; gradients pass straight through the
  /// fake quantizers.
  void sgdStep(const double *x, const int *y, std::size_t rows, const QuantPlan &plan,
               double lr) {
    auto p = forward(x, rows, plan);
    const auto classes = static_cast<std::size_t>(sizes_.back());
    std::vector<double> delta = p.pre.back();
    for (std::size_t r = 0; r < rows; ++r) {
      double *row = &delta[r * classes];
      const double mx = *std::max_element(row, row + classes);
      double sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        row[c] = std::exp(row[c] - mx);
        sum += row[c];
      }
      for (std::size_t c = 0; c < classes; ++c) {
        row[c] = row[c] / sum / static_cast<double>(rows);
      }
      row[static_cast<std::size_t>(y[r])] -= 1.0 / static_cast<double>(rows);
    }
    std::vector<double> grads(params_.size(), 0.0);
    for (std::size_t l = layers(); l-- > 0;) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      const auto &a = p.inputs[l];
      const auto &w = p.weights[l];
      double *gw = &grads[offsets_[l]];
      double *gb = gw + in * out;
      std::vector<double> back(rows * in, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          const double d = delta[r * out + o];
          gb[o] += d;
          for (std::size_t i = 0; i < in; ++i) {
            gw[o * in + i] += d * a[r * in + i];
            back[r * in + i] += d * w[o * in + i];
          }
        }
      }
      if (l > 0) {
        const auto &z = p.pre[l - 1];
        for (std::size_t k = 0; k < back.size(); ++k) {
          if (z[k] <= 0.0) {
            back[k] = 0.0;
          }
        }
      }
      delta = std::move(back);
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
      params_[k] -= lr * grads[k];
    }
  }

  double accuracy(const Dataset &d, const QuantPlan &plan) const {
    const auto p = forward(d.x.data(), d.size(), plan);
    const auto classes = static_cast<std::size_t>(sizes_.back());
    const auto &logits = p.pre.back();
    std::size_t correct = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      const auto *row = &logits[r * classes];
      const auto pred = std::max_element(row, row + classes) - row;
      correct += pred == d.y[r] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(d.size());
  }

private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

void trainEpochs(Net &net, const Dataset &d, const QuantPlan &plan, const ToyQatOptions &o,
                 int epochs, Rng &rng) {
  std::vector<std::size_t> order(d.size());
  std::vector<double> bx;
  std::vector<int> by;
  const auto f = static_cast<std::size_t>(d.features);
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(o.batch)) {
      const auto rows = std::min(static_cast<std::size_t>(o.batch), order.size() - start);
      bx.resize(rows * f);
      by.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto s = order[start + r];
        std::copy_n(&d.x[s * f], f, &bx[r * f]);
        by[r] = d.y[s];
      }
      net.sgdStep(bx.data(), by.data(), rows, plan, o.lr);
    }
  }
}

Dataset sampleBlobs(const std::vector<double> &centers, const ToyQatOptions &o, int n, Rng &rng) {
  Dataset d;
  d.features = o.features;
  for (int s = 0; s < n; ++s) {
    const int c = s % o.classes;
    for (int f = 0; f < o.features; ++f) {
      d.x.push_back(centers[static_cast<std::size_t>(c * o.features + f)] + o.noise * rng.normal());
    }
    d.y.push_back(c);
  }
  return d;
}

constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

} // namespace

BlobData makeBlobs(const ToyQatOptions &o, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> centers;
  for (int i = 0; i < o.classes * o.features; ++i) {
    centers.push_back(rng.normal());
  }
  BlobData b;
  b.train = sampleBlobs(centers, o, o.train_samples, rng);
  b.val = sampleBlobs(centers, o, o.val_samples, rng);
  return b;
}

ToyQatOracle::ToyQatOracle(std::vector<std::string> layerIds, std::uint64_t seed,
                           ToyQatOptions options)
    : ids_(std::move(layerIds)), seed_(seed), options_(options) {
  if (ids_.empty()) {
    throw ValidationError("toy oracle needs at least one layer");
  }
  data_ = makeBlobs(options_, seed_);
  sizes_.push_back(options_.features);
  for (std::size_t i = 1; i < ids_.size(); ++i) {
    sizes_.push_back(options_.hidden);
  }
  sizes_.push_back(options_.classes);

  Rng rng(seed_ + 1);
  std::vector<double> params;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    for (int k = 0; k < sizes_[l] * sizes_[l + 1]; ++k) {
      params.push_back(rng.uniform(-bound, bound));
    }
    params.insert(params.end(), static_cast<std::size_t>(sizes_[l + 1]), 0.0);
  }
  Net net(sizes_, std::move(params));
  trainEpochs(net, data_.train, std::nullopt, options_, options_.pretrain_epochs, rng);
  floatAccuracy_ = net.accuracy(data_.val, std::nullopt);
  pretrained_ = net.params();
}

double ToyQatOracle::baselineAccuracy() {
  if (!haveBaseline_) {
    baseline_ = evaluate(QuantConfig::uniform(ids_, baselineBits_));
    haveBaseline_ = true;
  }
  return baseline_;
}

double ToyQatOracle::evaluate(const QuantConfig &config) {
  if (config.layers.size() != ids_.size()) {
    throw ValidationError("toy oracle expects " + std::to_string(ids_.size()) +
                          " layers, config has " + std::to_string(config.layers.size()));
  }
  std::vector<LayerQuant> plan;
  for (const auto &l : config.layers) {
    if (l.w_bit < 2 || l.w_bit > 8 || l.a_bit < 2 || l.a_bit > 8) {
      throw ValidationError("layer '" + l.layer_id + "' bits outside [2, 8]");
    }
    plan.push_back({l.w_bit, l.a_bit});
  }
  Net net(sizes_, pretrained_);
  Rng rng(seed_ ^ kShuffleStream);
  trainEpochs(net, data_.train, plan, options_, options_.finetune_epochs, rng);
  return net.accuracy(data_.val, plan);
}

} // namespace cimforge::aq
