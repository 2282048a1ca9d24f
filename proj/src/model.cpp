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

#include "denet/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace denet {

DenetModel::DenetModel(const RunConfig& config, int num_classes)
    : config_(config), num_classes_(num_classes) {
  config_.validate();
  if (num_classes < 2) throw ConfigError("at least two identity classes are required");
  std::mt19937_64 rng(config_.seed);
  for (Modality m : kAllModalities) encoders_.emplace_back(store_, config_, m, rng);
  cmft_ = std::make_unique<CmftBank>(store_, config_, rng);
  graph_ = std::make_unique<EnhancementGraph>(store_, config_, rng);
  head_ = ClassifierHead::create(store_, "head/final", config_.final_dim(), num_classes, rng);
  if (config_.aux_branch_heads)
    for (Modality m : kAllModalities)
      branch_heads_.push_back(ClassifierHead::create(store_, "head/" + std::string(to_string(m)),
                                                     config_.feature_channels(), num_classes, rng));
}

Composition DenetModel::forward_state(MissingState state,
                                      const std::array<std::optional<Tensor>, kNumModalities>& images) const {
  if (!validate_state(state)) throw InvariantError("cannot embed a sample without modalities");
  ModalityFeatures features;
  for (Modality m : state.available()) {
    const auto& img = images[static_cast<std::size_t>(index_of(m))];
    if (!img) throw InvariantError("image missing for an available modality");
    features[static_cast<std::size_t>(index_of(m))] = encoder(m).extract(ag::Var(*img), false);
  }
  auto complete = recover_missing(state, features, *cmft_, config_.recovery_priority, false);
  return compose_final(state, complete, *graph_);
}

Tensor stack_images(const std::vector<const SampleTriplet*>& samples, Modality m) {
  if (samples.empty()) throw UsageError("stack_images: no samples");
  const Tensor& first = samples.front()->image(m);
  const std::size_t per = first.size();
  Tensor out({static_cast<int>(samples.size()), first.dim(0), first.dim(1), first.dim(2)});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& img = samples[i]->image(m);
    if (img.shape() != first.shape()) throw ConfigError("images of one modality differ in shape");
    std::copy(img.data(), img.data() + per, out.data() + i * per);
  }
  return out;
}

EmbeddingVector embed_sample(const SampleTriplet& sample, const DenetModel& model) {
  ag::NoGradGuard no_grad;
  std::array<std::optional<Tensor>, kNumModalities> images;
  for (Modality m : sample.missing.available()) {
    const Tensor& img = sample.image(m);
    images[static_cast<std::size_t>(index_of(m))] = img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)});
  }
  auto comp = model.forward_state(sample.missing, images);
  EmbeddingVector out;
  out.data = comp.final.value().reshaped({comp.final.dim(1)});
  double sq = 0.0;
  for (double v : out.data.values()) sq += v * v;
  out.l2norm = std::sqrt(sq);
  out.state = sample.missing;
  return out;
}

Tensor embed_samples(const std::vector<const SampleTriplet*>& samples, const DenetModel& model) {
  ag::NoGradGuard no_grad;
  const int dim = model.config().final_dim();
  Tensor out({static_cast<int>(samples.size()), dim});
  std::map<std::uint8_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i]->missing.mask()].push_back(i);
  constexpr std::size_t kChunk = 32;
  for (const auto& [mask, members] : groups) {
    const MissingState state = MissingState::from_mask(mask);
    for (std::size_t start = 0; start < members.size(); start += kChunk) {
      const std::size_t end = std::min(members.size(), start + kChunk);
      std::vector<const SampleTriplet*> chunk;
      for (std::size_t k = start; k < end; ++k) chunk.push_back(samples[members[k]]);
      std::array<std::optional<Tensor>, kNumModalities> images;
      for (Modality m : state.available()) images[static_cast<std::size_t>(index_of(m))] = stack_images(chunk, m);
      auto comp = model.forward_state(state, images);
      for (std::size_t k = start; k < end; ++k)
        std::copy_n(comp.final.value().data() + (k - start) * dim, dim,
                    out.data() + members[k] * static_cast<std::size_t>(dim));
    }
  }
  return out;
}

}  // namespace denet
