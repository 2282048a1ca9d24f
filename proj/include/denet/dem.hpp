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

struct EdgeKey {
  Modality source;
  Modality target;
  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
};

std::string to_string(EdgeKey e);

/// The six ordered edges R->N, R->T, N->R, N->T, T->R, T->N.
std::vector<EdgeKey> all_edges();

/// Edges kept for `state` under `mode`. Dynamic mode drops every edge whose
/// tail (source) is missing; the other modes ignore the state.
std::vector<EdgeKey> cut_edges(EnhancementMode mode, MissingState state);

/// Cross-feature enhancement of a target by a source.
///   Fs' = q(Fs), Fs'' = v(Fs), Ft' = k(Ft)            (1x1 convs, C -> C')
///   A   = flat(Fs')^T flat(Ft')                         (HW_s x HW_t)
///   agg = flat(Fs'') A, reshaped to (C', H, W)
///   out = Ft + proj(agg)                                (1x1 conv, C' -> C)
class EnhancementEdge {
 public:
  EnhancementEdge(nn::ParameterStore& store, const RunConfig& config, EdgeKey key,
                  std::mt19937_64& rng);

  EdgeKey key() const { return key_; }
  std::string prefix() const;

  /// proj(agg) without the residual.
  ag::Var residual(const ag::Var& f_source, const ag::Var& f_target) const;
  ag::Var enhance(const ag::Var& f_source, const ag::Var& f_target) const;

  nn::Conv2d source_query;  // Fs'
  nn::Conv2d source_value;  // Fs''
  nn::Conv2d target_key;    // Ft'
  nn::Conv2d output;

 private:
  EdgeKey key_;
  bool softmax_;
};

FeatureMap enhance(const EnhancementEdge& edge, const FeatureMap& f_source, const FeatureMap& f_target);

struct Composition {
  ag::Var c1;     // (N, 3C) pooled enhanced features
  ag::Var c2;     // (N, 3C) raw pooled if available, else enhanced recovered
  ag::Var final;  // (N, 6C)
};

class EnhancementGraph {
 public:
  EnhancementGraph(nn::ParameterStore& store, const RunConfig& config, std::mt19937_64& rng);

  EnhancementMode mode() const { return mode_; }
  void set_mode(EnhancementMode mode) { mode_ = mode; }
  const EnhancementEdge& edge(EdgeKey key) const;
  const std::vector<EnhancementEdge>& edges() const { return edges_; }
  std::vector<EdgeKey> cut(MissingState state) const { return cut_edges(mode_, state); }

 private:
  EnhancementMode mode_;
  std::vector<EnhancementEdge> edges_;
};

/// `features` must hold all three modalities (after recovery). Each target
/// is enhanced by the sum of residuals of its surviving in-edges.
Composition compose_final(MissingState state, const ModalityFeatures& features,
                          const EnhancementGraph& graph);

/// Same, over an explicit edge set.
Composition compose_final(MissingState state, const ModalityFeatures& features,
                          const EnhancementGraph& graph, const std::vector<EdgeKey>& edges);

}  // namespace denet
