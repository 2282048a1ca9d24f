// Copyright 2026 The DENet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "denet/config.hpp"
#include "denet/encoder.hpp"
#include "denet/features.hpp"
#include "denet/nn.hpp"

namespace denet {

struct CmftOutput {
  ag::Var fake_image;   // (N, c_target, H, W), values in [0, 1]
  FeatureMap recovered;  // provenance Recovered, modality = target
};

/// Transformation from one modality's feature to another's: an up-sample
/// path to a fake target image, then a down-sample path back to a feature.
class CmftPair {
 public:
  CmftPair(nn::ParameterStore& store, const RunConfig& config, Modality source, Modality target,
           std::mt19937_64& rng);

  Modality source() const { return source_; }
  Modality target() const { return target_; }
  std::string prefix() const;

  CmftOutput transform(const FeatureMap& f_src, bool training) const;

  /// Number of transform() calls since construction or the last reset.
  long calls() const { return calls_->load(); }
  void reset_calls() const { calls_->store(0); }

 private:
  Modality source_, target_;
  std::vector<nn::ConvTranspose2d> up_;
  std::vector<nn::BatchNorm> up_bn_;  // one fewer than up_
  std::vector<ConvBlock> down_;
  std::shared_ptr<std::atomic<long>> calls_ = std::make_shared<std::atomic<long>>(0);
};

/// theta (real side) and theta' (recovered side): Linear -> BN -> ReLU each,
/// with separate parameters.
struct ProjectionHead {
  nn::Linear real_fc;
  nn::BatchNorm real_bn;
  nn::Linear recovered_fc;
  nn::BatchNorm recovered_bn;

  static ProjectionHead create(nn::ParameterStore& store, const std::string& prefix, int channels,
                               int embed_dim, std::mt19937_64& rng);
  ag::Var project_real(const ag::Var& pooled, bool training) const;
  ag::Var project_recovered(const ag::Var& pooled, bool training) const;
};

/// Squared L2 image difference, averaged over every element (Mean) or summed
/// per sample and averaged over the batch (Sum).
ag::Var reconstruction_loss(const ag::Var& fake, const ag::Var& real, RecReduction reduction);

/// Batch mean of ||theta(GAP(f_real)) - theta'(GAP(f_rec))||_1.
ag::Var similarity_loss(const ProjectionHead& head, const FeatureMap& f_real,
                        const FeatureMap& f_rec, bool training);

/// All six ordered pairs plus one projection head per target modality.
class CmftBank {
 public:
  CmftBank(nn::ParameterStore& store, const RunConfig& config, std::mt19937_64& rng);

  const CmftPair& pair(Modality source, Modality target) const;
  const ProjectionHead& head(Modality target) const { return heads_[static_cast<std::size_t>(index_of(target))]; }
  const std::vector<CmftPair>& pairs() const { return pairs_; }
  long total_calls() const;
  void reset_calls() const;

 private:
  std::vector<CmftPair> pairs_;
  std::vector<ProjectionHead> heads_;
};

/// Fills every modality absent from `state` by transforming the first
/// available modality in `priority`. Present features pass through untouched.
ModalityFeatures recover_missing(MissingState state, const ModalityFeatures& features,
                                 const CmftBank& bank, const std::vector<Modality>& priority,
                                 bool training = false);

}  // namespace denet
