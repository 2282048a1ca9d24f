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

#include <random>
#include <string>
#include <vector>

#include "denet/config.hpp"
#include "denet/features.hpp"
#include "denet/nn.hpp"

namespace denet {

/// Channel-then-spatial sequential gating.
struct AttentionBlock {
  nn::Linear squeeze;  // C -> C/r
  nn::Linear expand;   // C/r -> C
  nn::Conv2d spatial;  // [mean; max] -> 1

  static AttentionBlock create(nn::ParameterStore& store, const std::string& prefix, int channels,
                               int reduction, int spatial_kernel, std::mt19937_64& rng);

  /// sigmoid(MLP(avg) + MLP(max)), shape (N, C, 1, 1).
  ag::Var channel_gate(const ag::Var& f) const;
  /// sigmoid(conv([mean_c; max_c])), shape (N, 1, H, W).
  ag::Var spatial_gate(const ag::Var& f) const;
  ag::Var operator()(const ag::Var& f) const;
};

ag::Var apply_attention(const AttentionBlock& block, const ag::Var& f);

struct ConvBlock {
  nn::Conv2d conv;
  nn::BatchNorm bn;
  ag::Var operator()(const ag::Var& x, bool training) const {
    return ops::relu(bn(conv(x), training));
  }
};

/// Stack of stride-2 conv blocks with attention; one independent instance per
/// modality.
class BranchEncoder {
 public:
  BranchEncoder(nn::ParameterStore& store, const RunConfig& config, Modality modality,
                std::mt19937_64& rng);

  Modality modality() const { return modality_; }
  std::string prefix() const;
  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  const std::vector<AttentionBlock>& attention() const { return attention_; }

  /// image: (N, c_img, H, W) with c_img the stored channel count of this
  /// modality; single-channel images are replicated to the input width.
  FeatureMap extract(const ag::Var& image, bool training) const;

 private:
  Modality modality_;
  int in_channels_;
  int image_channels_;
  int height_, width_;
  AttentionPlacement placement_;
  std::vector<ConvBlock> blocks_;
  std::vector<AttentionBlock> attention_;
};

FeatureMap extract(const BranchEncoder& branch, const ag::Var& image, bool training);

/// out[n, c] = mean over H x W of f[n, c].
ag::Var global_average_pool(const FeatureMap& f);

}  // namespace denet
