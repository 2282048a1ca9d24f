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

#include "denet/dem.hpp"

#include <algorithm>

#include "denet/encoder.hpp"

namespace denet {

std::string to_string(EdgeKey e) {
  return std::string(to_string(e.source)) + "->" + std::string(to_string(e.target));
}

std::vector<EdgeKey> all_edges() {
  std::vector<EdgeKey> out;
  for (Modality s : kAllModalities)
    for (Modality t : kAllModalities)
      if (s != t) out.push_back({s, t});
  return out;
}

std::vector<EdgeKey> cut_edges(EnhancementMode mode, MissingState state) {
  if (!validate_state(state)) throw InvariantError("cut_edges: empty missing state");
  using M = Modality;
  switch (mode) {
    case EnhancementMode::Dynamic: {
      std::vector<EdgeKey> out;
      for (const auto& e : all_edges())
        if (state.has(e.source)) out.push_back(e);
      return out;
    }
    case EnhancementMode::Fixed:
      return {{M::RGB, M::NIR}, {M::RGB, M::TIR}};
    case EnhancementMode::SingleDirection:
      return {{M::RGB, M::NIR}, {M::NIR, M::TIR}, {M::TIR, M::RGB}};
    case EnhancementMode::None:
      return {};
  }
  return {};
}

EnhancementEdge::EnhancementEdge(nn::ParameterStore& store, const RunConfig& config, EdgeKey key,
                                 std::mt19937_64& rng)
    : key_(key), softmax_(config.dem_softmax) {
  const int c = config.feature_channels();
  const int reduced = c / config.dem_reduction;
  source_query = nn::Conv2d::create(store, prefix() + "/source_query", c, reduced, 1, 1, 0, true, rng);
  source_value = nn::Conv2d::create(store, prefix() + "/source_value", c, reduced, 1, 1, 0, true, rng);
  target_key = nn::Conv2d::create(store, prefix() + "/target_key", c, reduced, 1, 1, 0, true, rng);
  output = nn::Conv2d::create(store, prefix() + "/output", reduced, c, 1, 1, 0, true, rng);
  // Zero-initialized projection: every edge starts as the identity.
  output.weight.mutable_value().fill(0.0);
}

std::string EnhancementEdge::prefix() const { return "dem/" + to_string(key_); }

ag::Var EnhancementEdge::residual(const ag::Var& f_source, const ag::Var& f_target) const {
  if (f_source.shape() != f_target.shape() || f_source.value().rank() != 4)
    throw UsageError("enhance: source " + shape_string(f_source.shape()) + " and target " +
                     shape_string(f_target.shape()) + " must share a (N,C,H,W) shape");
  const int n = f_source.dim(0), h = f_source.dim(2), w = f_source.dim(3);
  const int reduced = source_query.out_channels();
  auto flat = [&](const ag::Var& v) { return ops::reshape(v, {n, reduced, h * w}); };
  auto query = flat(source_query(f_source));
  auto value = flat(source_value(f_source));
  auto key = flat(target_key(f_target));
  auto affinity = ops::bmm(query, true, key, false);  // (N, HW_s, HW_t)
  if (softmax_) affinity = ops::softmax_axis1(affinity);
  auto aggregate = ops::bmm(value, false, affinity, false);  // (N, C', HW_t)
  return output(ops::reshape(aggregate, {n, reduced, h, w}));
}

ag::Var EnhancementEdge::enhance(const ag::Var& f_source, const ag::Var& f_target) const {
  return ops::add(f_target, residual(f_source, f_target));
}

FeatureMap enhance(const EnhancementEdge& edge, const FeatureMap& f_source, const FeatureMap& f_target) {
  auto out = edge.enhance(f_source.data, f_target.data);
  check_finite(out.value(), "enhancement");
  return FeatureMap{out, f_target.modality, f_target.provenance};
}

EnhancementGraph::EnhancementGraph(nn::ParameterStore& store, const RunConfig& config,
                                   std::mt19937_64& rng)
    : mode_(config.enhancement_mode) {
  for (const auto& key : all_edges()) edges_.emplace_back(store, config, key, rng);
}

const EnhancementEdge& EnhancementGraph::edge(EdgeKey key) const {
  for (const auto& e : edges_)
    if (e.key() == key) return e;
  throw UsageError("no enhancement edge " + to_string(key));
}

Composition compose_final(MissingState state, const ModalityFeatures& features,
                          const EnhancementGraph& graph) {
  return compose_final(state, features, graph, graph.cut(state));
}

Composition compose_final(MissingState state, const ModalityFeatures& features,
                          const EnhancementGraph& graph, const std::vector<EdgeKey>& edges) {
  for (const auto& f : features)
    if (!f) throw InvariantError("compose_final needs a feature for every modality");
  std::vector<ag::Var> enhanced_pooled, c2_parts;
  for (Modality t : kAllModalities) {
    const auto& target = *features[static_cast<std::size_t>(index_of(t))];
    ag::Var enhanced = target.data;
    for (const auto& e : edges) {
      if (e.target != t) continue;
      const auto& source = *features[static_cast<std::size_t>(index_of(e.source))];
      enhanced = ops::add(enhanced, graph.edge(e).residual(source.data, target.data));
    }
    check_finite(enhanced.value(), "enhancement");
    auto pooled = ops::global_avg_pool(enhanced);
    enhanced_pooled.push_back(pooled);
    c2_parts.push_back(state.has(t) ? ops::global_avg_pool(target.data) : pooled);
  }
  Composition out;
  out.c1 = ops::concat(enhanced_pooled);
  out.c2 = ops::concat(c2_parts);
  out.final = ops::concat({out.c1, out.c2});
  return out;
}

}  // namespace denet
