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

#include "cimforge/aq/nn.h"
#include "cimforge/rng.h"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cimforge::aq {

inline constexpr int kObservationSize = 9;
inline constexpr int kActionSize = 2;

using Observation = std::array<double, kObservationSize>;
/// (weight action, activation action), each in [0, 1].
using Action = std::array<double, kActionSize>;

struct ReplayTuple {
  Observation obs{};
  Action action{};
  double reward = 0.0;
  Observation next{};
  /// Last step of its episode; the target does not bootstrap past it.
  bool terminal = false;
  bool operator==(const ReplayTuple &) const = default;
};

/// Fixed-capacity ring buffer; the oldest tuples are overwritten first.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity = 2048) : capacity_(capacity) {}

  void push(const ReplayTuple &t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ReplayTuple &operator[](std::size_t i) const { return items_[i]; }
  /// batch tuples drawn uniformly with replacement from the newest window
  /// tuples (all of them when window is 0 or exceeds the size).
  std::vector<ReplayTuple> sample(std::size_t batch, Rng &rng, std::size_t window = 0) const;

  bool operator==(const ReplayBuffer &) const = default;

private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<ReplayTuple> items_;
};

struct DdpgOptions {
  int hidden = 64;
  double actor_lr = 1e-3;
  double critic_lr = 3e-3;
  double tau = 0.01;
  /// Discount of the Bellman target.
  double discount = 1.0;
  std::size_t buffer_capacity = 2048;
  std::size_t batch_size = 64;
  /// Minibatches come from the newest sample_window tuples only; 0 means
  /// the whole buffer.
  std::size_t sample_window = 64;
  /// Rewards enter the critic targets multiplied by this.
  double reward_scale = 0.01;
};

struct Losses {
  double critic = 0.0;
  double actor = 0.0;
};

/// Deterministic actor-critic agent with target networks.
///
/// Actor 9 -> 64 -> 64 -> 2 with sigmoid output, critic 11 -> 64 -> 64 -> 1
/// over the concatenated observation and action. The actor's output layer
/// starts at zero, so a fresh actor proposes 0.5 for every observation.
class Agent {
public:
  explicit Agent(std::uint64_t seed, DdpgOptions options = {});

  Action policy(const Observation &obs) const;
  /// policy(obs) plus Gaussian noise of scale sigma, truncated to [0, 1]
  /// by resampling.
  Action act(const Observation &obs, double sigma);

  void remember(const ReplayTuple &t) { buffer_.push(t); }

  /// One update on a batch sampled from the buffer. Throws ValidationError
  /// when the buffer holds fewer than batch_size tuples.
  Losses trainStep();
  /// One update on the given batch.
  Losses train(std::span<const ReplayTuple> batch);

  /// Bellman targets y = s R + discount * Q'(o', pi'(o')) with s the reward
  /// scale, without bootstrap on terminal tuples.
  std::vector<double> targets(std::span<const ReplayTuple> batch) const;
  /// Mean squared error of the critic against fixed targets; adds
  /// d loss / d critic params to grads when given.
  double criticLoss(std::span<const ReplayTuple> batch, std::span<const double> y,
                    std::vector<double> *grads = nullptr) const;
  /// Gradient of -mean Q(o, pi(o)) with respect to the actor parameters.
  std::vector<double> actorGradient(std::span<const ReplayTuple> batch,
                                    double *objective = nullptr) const;

  Mlp &actor() { return actor_; }
  Mlp &critic() { return critic_; }
  const Mlp &actor() const { return actor_; }
  const Mlp &critic() const { return critic_; }
  const Mlp &targetActor() const { return targetActor_; }
  const Mlp &targetCritic() const { return targetCritic_; }
  const ReplayBuffer &buffer() const { return buffer_; }
  const DdpgOptions &options() const { return options_; }

private:
  double q(const Mlp &critic, const Observation &o, const Action &a) const;

  DdpgOptions options_;
  Rng rng_;
  Mlp actor_;
  Mlp critic_;
  Mlp targetActor_;
  Mlp targetCritic_;
  Adam actorOpt_;
  Adam criticOpt_;
  ReplayBuffer buffer_;
};

} // namespace cimforge::aq
