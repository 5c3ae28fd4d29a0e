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

#include "cimforge/aq/oracle.h"

#include <cstdint>
#include <string>
#include <vector>

namespace cimforge::aq {

struct ToyQatOptions {
  int classes = 8;
  int features = 16;
  int hidden = 32;
  int train_samples = 2048;
  int val_samples = 512;
  /// Spread of each blob around its center.
  double noise = 1.6;
  int pretrain_epochs = 20;
  int finetune_epochs = 3;
  double lr = 0.05;
  int batch = 64;
};

/// Labelled samples, row-major features.
struct Dataset {
  std::vector<double> x;
  std::vector<int> y;
  int features = 0;
  std::size_t size() const { return y.size(); }
};

/// Gaussian class blobs, regenerated from the seed.
struct BlobData {
  Dataset train;
  Dataset val;
};
BlobData makeBlobs(const ToyQatOptions &options, std::uint64_t seed);

/// Fine-tunes a small float-pretrained MLP under fake quantization and
/// reports validation accuracy. One Dense layer per configured layer id:
/// features -> hidden -> ... -> hidden -> classes with ReLU between.
/// Weights are quantized signed; the first layer's input signed, later
/// inputs (post-ReLU) unsigned; activation scales are taken per batch.
class ToyQatOracle : public AccuracyOracle {
public:
  ToyQatOracle(std::vector<std::string> layerIds, std::uint64_t seed,
               ToyQatOptions options = {});

  std::string name() const override { return "toy"; }
  /// All layers at b_max (computed on first use and cached).
  double baselineAccuracy() override;
  double evaluate(const QuantConfig &config) override;

  void setBaselineBits(int bits) { baselineBits_ = bits; }
  /// Validation accuracy of the float model, in percent.
  double floatAccuracy() const { return floatAccuracy_; }
  const ToyQatOptions &options() const { return options_; }
  const std::vector<std::string> &layerIds() const { return ids_; }

private:
  std::vector<std::string> ids_;
  std::uint64_t seed_;
  ToyQatOptions options_;
  BlobData data_;
  std::vector<int> sizes_;
  std::vector<double> pretrained_;
  double floatAccuracy_ = 0.0;
  int baselineBits_ = 8;
  bool haveBaseline_ = false;
  double baseline_ = 0.0;
};

} // namespace cimforge::aq
