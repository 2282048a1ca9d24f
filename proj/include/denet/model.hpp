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

#include <memory>
#include <random>
#include <vector>

#include "denet/cmft.hpp"
#include "denet/config.hpp"
#include "denet/data.hpp"
#include "denet/dem.hpp"
#include "denet/encoder.hpp"
#include "denet/objectives.hpp"

namespace denet {

struct EmbeddingVector {
  Tensor data;  // (6C)
  double l2norm = 0.0;
  MissingState state;
};

/// All trainable parts: three branch encoders, six transformations with
/// projection heads, the enhancement graph and the classifier heads.
class DenetModel {
 public:
  DenetModel(const RunConfig& config, int num_classes);
  DenetModel(const DenetModel&) = delete;
  DenetModel& operator=(const DenetModel&) = delete;

  const RunConfig& config() const { return config_; }
  int num_classes() const { return num_classes_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }

  const BranchEncoder& encoder(Modality m) const { return encoders_[static_cast<std::size_t>(index_of(m))]; }
  const CmftBank& cmft() const { return *cmft_; }
  EnhancementGraph& graph() { return *graph_; }
  const EnhancementGraph& graph() const { return *graph_; }
  const ClassifierHead& head() const { return head_; }
  const ClassifierHead& branch_head(Modality m) const { return branch_heads_.at(static_cast<std::size_t>(index_of(m))); }

  /// Eval-mode embedding of a batch of images sharing one missing state.
  /// images[m] is (N, c_m, H, W) for every available m.
  Composition forward_state(MissingState state, const std::array<std::optional<Tensor>, kNumModalities>& images) const;

 private:
  RunConfig config_;
  int num_classes_;
  nn::ParameterStore store_;
  std::vector<BranchEncoder> encoders_;
  std::unique_ptr<CmftBank> cmft_;
  std::unique_ptr<EnhancementGraph> graph_;
  ClassifierHead head_;
  std::vector<ClassifierHead> branch_heads_;
};

/// Extract available features, recover the missing ones, cut the graph for
/// the sample's state and compose F_final. Parameters are not modified.
EmbeddingVector embed_sample(const SampleTriplet& sample, const DenetModel& model);

/// Batched version; samples are grouped by missing state. Row i of the
/// result belongs to samples[i].
Tensor embed_samples(const std::vector<const SampleTriplet*>& samples, const DenetModel& model);

/// Stacks one modality's images of `samples` into (N, C, H, W).
Tensor stack_images(const std::vector<const SampleTriplet*>& samples, Modality m);

}  // namespace denet
