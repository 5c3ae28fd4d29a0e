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

#include "cimforge/aq/agent.h"

#include "cimforge/error.h"

#include <algorithm>
#include <cmath>

namespace cimforge::aq {

namespace {

constexpr int kMaxResamples = 64;

std::array<double, kObservationSize + kActionSize> criticInput(const Observation &o,
                                                               const Action &a) {
  std::array<double, kObservationSize + kActionSize> x{};
  std::copy(o.begin(), o.end(), x.begin());
  std::copy(a.begin(), a.end(), x.begin() + kObservationSize);
  return x;
}

Action toAction(const std::vector<double> &v) { return {v[0], v[1]}; }

} // namespace

void ReplayBuffer::push(const ReplayTuple &t) {
  if (!std::isfinite(t.reward)) {
    throw ValidationError("replay tuple reward must be finite");
  }
  if (items_.size() < capacity_) {
    items_.push_back(t);
  } else {
    items_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<ReplayTuple> ReplayBuffer::sample(std::size_t batch, Rng &rng,
                                              std::size_t window) const {
  const std::size_t n = items_.size();
  if (n == 0) {
    throw ValidationError("cannot sample from an empty replay buffer");
  }
  const std::size_t w = window == 0 ? n : std::min(window, n);
  std::vector<ReplayTuple> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    // Offset back from the newest tuple, which sits just before next_.
    const auto back = static_cast<std::size_t>(rng.uniformInt(0, static_cast<std::int64_t>(w) - 1));
    out.push_back(items_[(next_ + n - 1 - back) % n]);
  }
  return out;
}

Agent::Agent(std::uint64_t seed, DdpgOptions options)
    : options_(options), rng_(seed), buffer_(options.buffer_capacity) {
  const int h = options_.hidden;
  actor_ = Mlp({kObservationSize, h, h, kActionSize}, Activation::ReLU, Activation::Sigmoid, rng_,
               true);
  critic_ = Mlp({kObservationSize + kActionSize, h, h, 1}, Activation::ReLU, Activation::Linear,
                rng_);
  targetActor_ = actor_;
  targetCritic_ = critic_;
  actorOpt_ = Adam(actor_.paramCount(), options_.actor_lr);
  criticOpt_ = Adam(critic_.paramCount(), options_.critic_lr);
}

Action Agent::policy(const Observation &obs) const { return toAction(actor_.forward(obs)); }

Action Agent::act(const Observation &obs, double sigma) {
  Action a = policy(obs);
  if (sigma <= 0.0) {
    return a;
  }
  for (auto &v : a) {
    const double mean = v;
    for (int i = 0; i < kMaxResamples; ++i) {
      v = rng_.normal(mean, sigma);
      if (v >= 0.0 && v <= 1.0) {
        break;
      }
    }
    v = std::clamp(v, 0.0, 1.0);
  }
  return a;
}

double Agent::q(const Mlp &critic, const Observation &o, const Action &a) const {
  return critic.forward(criticInput(o, a))[0];
}

std::vector<double> Agent::targets(std::span<const ReplayTuple> batch) const {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto &t : batch) {
    double v = t.reward * options_.reward_scale;
    if (!t.terminal) {
      v += options_.discount * q(targetCritic_, t.next, toAction(targetActor_.forward(t.next)));
    }
    y.push_back(v);
  }
  return y;
}

double Agent::criticLoss(std::span<const ReplayTuple> batch, std::span<const double> y,
                         std::vector<double> *grads) const {
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Mlp::Tape tape;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double err = critic_.forward(criticInput(batch[i].obs, batch[i].action), tape)[0] - y[i];
    loss += err * err / n;
    if (grads) {
      const double g = 2.0 * err / n;
      critic_.backward(tape, std::span<const double>(&g, 1), *grads);
    }
  }
  return loss;
}

std::vector<double> Agent::actorGradient(std::span<const ReplayTuple> batch,
                                         double *objective) const {
  const double n = static_cast<double>(batch.size());
  std::vector<double> grads(actor_.paramCount(), 0.0);
  std::vector<double> scratch(critic_.paramCount(), 0.0);
  Mlp::Tape actorTape;
  Mlp::Tape criticTape;
  double total = 0.0;
  for (const auto &t : batch) {
    const auto a = toAction(actor_.forward(t.obs, actorTape));
    total += critic_.forward(criticInput(t.obs, a), criticTape)[0];
    const double g = -1.0 / n;
    const auto dx = critic_.backward(criticTape, std::span<const double>(&g, 1), scratch);
    const std::array<double, kActionSize> da{dx[kObservationSize], dx[kObservationSize + 1]};
    actor_.backward(actorTape, da, grads);
  }
  if (objective) {
    *objective = -total / n;
  }
  return grads;
}

Losses Agent::trainStep() {
  if (buffer_.size() < options_.batch_size) {
    throw ValidationError("replay buffer holds " + std::to_string(buffer_.size()) +
                          " tuples, training needs " + std::to_string(options_.batch_size));
  }
  const auto batch = buffer_.sample(options_.batch_size, rng_, options_.sample_window);
  return train(batch);
}

Losses Agent::train(std::span<const ReplayTuple> batch) {
  Losses out;
  const auto y = targets(batch);
  std::vector<double> cg(critic_.paramCount(), 0.0);
  out.critic = criticLoss(batch, y, &cg);
  criticOpt_.step(critic_.params(), cg);

  const auto ag = actorGradient(batch, &out.actor);
  actorOpt_.step(actor_.params(), ag);
  targetCritic_.softUpdate(critic_, options_.tau);
  targetActor_.softUpdate(actor_, options_.tau);
  return out;
}

} // namespace cimforge::aq
