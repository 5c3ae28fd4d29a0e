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

#include "cimforge/aq/nn.h"

#include "cimforge/error.h"

#include <algorithm>
#include <cmath>

namespace cimforge::aq {

namespace {

double activate(Activation a, double z) {
  switch (a) {
  case Activation::ReLU:
    return z > 0.0 ? z : 0.0;
  case Activation::Sigmoid:
    return 1.0 / (1.0 + std::exp(-z));
  case Activation::Linear:
    break;
  }
  return z;
}

/// Derivative expressed through the activation's output y.
double derivative(Activation a, double y) {
  switch (a) {
  case Activation::ReLU:
    return y > 0.0 ? 1.0 : 0.0;
  case Activation::Sigmoid:
    return y * (1.0 - y);
  case Activation::Linear:
    break;
  }
  return 1.0;
}

} // namespace

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output, Rng &rng, bool zeroOutput)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) {
    throw ValidationError("network needs at least an input and an output layer");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
  }
  params_.assign(total, 0.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (zeroOutput && l + 2 == sizes_.size()) {
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const auto end = biasOffset(l) + static_cast<std::size_t>(sizes_[l + 1]);
    for (std::size_t i = weightOffset(l); i < end; ++i) {
      params_[i] = rng.uniform(-bound, bound);
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  return forward(x, tape);
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape &tape) const {
  if (static_cast<int>(x.size()) != sizes_.front()) {
    throw ValidationError("network input has " + std::to_string(x.size()) + " features, expected " +
                          std::to_string(sizes_.front()));
  }
  tape.values.assign(1, std::vector<double>(x.begin(), x.end()));
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto &in = tape.values.back();
    const auto nIn = static_cast<std::size_t>(sizes_[l]);
    const auto nOut = static_cast<std::size_t>(sizes_[l + 1]);
    const double *w = &params_[weightOffset(l)];
    const double *b = &params_[biasOffset(l)];
    std::vector<double> out(nOut);
    for (std::size_t o = 0; o < nOut; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < nIn; ++i) {
        z += w[o * nIn + i] * in[i];
      }
      out[o] = activate(activation(l), z);
    }
    tape.values.push_back(std::move(out));
  }
  return tape.values.back();
}

std::vector<double> Mlp::backward(const Tape &tape, std::span<const double> gradOut,
                                  std::span<double> grads) const {
  std::vector<double> delta(gradOut.begin(), gradOut.end());
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const auto nIn = static_cast<std::size_t>(sizes_[l]);
    const auto nOut = static_cast<std::size_t>(sizes_[l + 1]);
    const auto &in = tape.values[l];
    const auto &out = tape.values[l + 1];
    for (std::size_t o = 0; o < nOut; ++o) {
      delta[o] *= derivative(activation(l), out[o]);
    }
    const double *w = &params_[weightOffset(l)];
    double *gw = &grads[weightOffset(l)];
    double *gb = &grads[biasOffset(l)];
    std::vector<double> next(nIn, 0.0);
    for (std::size_t o = 0; o < nOut; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < nIn; ++i) {
        gw[o * nIn + i] += delta[o] * in[i];
        next[i] += w[o * nIn + i] * delta[o];
      }
    }
    delta = std::move(next);
  }
  return delta;
}

void Mlp::softUpdate(const Mlp &source, double tau) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i] = tau * source.params_[i] + (1.0 - tau) * params_[i];
  }
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

} // namespace cimforge::aq
