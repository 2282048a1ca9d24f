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

#include "denet/encoder.hpp"

#include <cmath>

namespace denet {

void check_finite(const Tensor& t, const char* stage) {
  if (!t.all_finite()) throw InvariantError(std::string("non-finite values after ") + stage);
}

AttentionBlock AttentionBlock::create(nn::ParameterStore& store, const std::string& prefix,
                                      int channels, int reduction, int spatial_kernel,
                                      std::mt19937_64& rng) {
  const int hidden = std::max(1, channels / reduction);
  AttentionBlock block;
  block.squeeze = nn::Linear::create(store, prefix + "/channel/squeeze", channels, hidden, true, rng);
  block.expand = nn::Linear::create(store, prefix + "/channel/expand", hidden, channels, true, rng);
  block.spatial = nn::Conv2d::create(store, prefix + "/spatial", 2, 1, spatial_kernel, 1,
                                     spatial_kernel / 2, true, rng);
  return block;
}

ag::Var AttentionBlock::channel_gate(const ag::Var& f) const {
  auto mlp = [this](const ag::Var& v) { return expand(ops::relu(squeeze(v))); };
  auto logits = ops::add(mlp(ops::global_avg_pool(f)), mlp(ops::global_max_pool(f)));
  return ops::reshape(ops::sigmoid(logits), {f.dim(0), f.dim(1), 1, 1});
}

ag::Var AttentionBlock::spatial_gate(const ag::Var& f) const {
  auto pooled = ops::concat({ops::channel_mean(f), ops::channel_max(f)});
  return ops::sigmoid(spatial(pooled));
}

ag::Var AttentionBlock::operator()(const ag::Var& f) const {
  auto refined = ops::mul(f, channel_gate(f));
  return ops::mul(refined, spatial_gate(refined));
}

ag::Var apply_attention(const AttentionBlock& block, const ag::Var& f) { return block(f); }

BranchEncoder::BranchEncoder(nn::ParameterStore& store, const RunConfig& config, Modality modality,
                             std::mt19937_64& rng)
    : modality_(modality),
      in_channels_(config.in_channels),
      image_channels_(config.image_channels(modality)),
      height_(config.image_height),
      width_(config.image_width),
      placement_(config.attention_placement) {
  int in = in_channels_;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const std::string block = prefix() + "/block" + std::to_string(i);
    const int out = config.widths[i];
    ConvBlock b;
    b.conv = nn::Conv2d::create(store, block + "/conv", in, out, 3, 2, 1, false, rng);
    b.bn = nn::BatchNorm::create(store, block + "/bn", out);
    blocks_.push_back(b);
    const bool last = i + 1 == config.widths.size();
    if (placement_ == AttentionPlacement::EveryBlock || last)
      attention_.push_back(AttentionBlock::create(store, block + "/attention", out,
                                                  config.attention_reduction,
                                                  config.spatial_kernel, rng));
    in = out;
  }
}

std::string BranchEncoder::prefix() const { return "encoder/" + std::string(to_string(modality_)); }

FeatureMap BranchEncoder::extract(const ag::Var& image, bool training) const {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != image_channels_ || s[2] != height_ || s[3] != width_)
    throw ConfigError(std::string(to_string(modality_)) + " encoder expects images (N," +
                      std::to_string(image_channels_) + "," + std::to_string(height_) + "," +
                      std::to_string(width_) + "), got " + shape_string(s));
  ag::Var x = image;
  if (image_channels_ == 1 && in_channels_ > 1) x = ops::repeat_channels(x, in_channels_);
  std::size_t next_attention = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i](x, training);
    const bool last = i + 1 == blocks_.size();
    if (placement_ == AttentionPlacement::EveryBlock || last) x = attention_[next_attention++](x);
  }
  check_finite(x.value(), "feature extraction");
  return FeatureMap{x, modality_, Provenance::Extracted};
}

FeatureMap extract(const BranchEncoder& branch, const ag::Var& image, bool training) {
  return branch.extract(image, training);
}

ag::Var global_average_pool(const FeatureMap& f) { return ops::global_avg_pool(f.data); }

}  // namespace denet
