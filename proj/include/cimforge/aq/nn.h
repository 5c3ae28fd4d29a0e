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

#include "cimforge/rng.h"

#include <cstddef>
#include <span>
#include <vector>

namespace cimforge::aq {

enum class Activation { Linear, ReLU, Sigmoid };

/// Fully connected network with all parameters in one flat vector
/// (per layer: weights out x in, row-major, then biases).
class Mlp {
public:
  Mlp() = default;
  /// Fan-in uniform initialization. With zeroOutput the last layer starts
  /// at zero, so the network's output does not depend on its input.
  Mlp(std::vector<int> sizes, Activation hidden, Activation output, Rng &rng,
      bool zeroOutput = false);

  /// Activations of every layer, input first; kept for backward().
  struct Tape {
    std::vector<std::vector<double>> values;
  };

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Tape &tape) const;

  /// Adds dL/dparams to grads and returns dL/dx for the tape's input.
  std::vector<double> backward(const Tape &tape, std::span<const double> gradOut,
                               std::span<double> grads) const;

  std::vector<double> &params() { return params_; }
  const std::vector<double> &params() const { return params_; }
  std::size_t paramCount() const { return params_.size(); }
  int inputSize() const { return sizes_.front(); }
  int outputSize() const { return sizes_.back(); }

  /// this <- tau * source + (1 - tau) * this.
  void softUpdate(const Mlp &source, double tau);

  bool operator==(const Mlp &) const = default;

private:
  std::size_t weightOffset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t biasOffset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer] * sizes_[layer + 1]);
  }
  Activation activation(std::size_t layer) const {
    return layer + 2 == sizes_.size() ? output_ : hidden_;
  }

  std::vector<int> sizes_;
  Activation hidden_ = Activation::ReLU;
  Activation output_ = Activation::Linear;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

class Adam {
public:
  Adam() = default;
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// One descent step along grads.
  void step(std::span<double> params, std::span<const double> grads);

  bool operator==(const Adam &) const = default;

private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

} // namespace cimforge::aq
