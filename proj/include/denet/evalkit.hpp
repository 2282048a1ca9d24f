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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "denet/config.hpp"
#include "denet/tensor.hpp"

namespace denet {

/// Pairwise Euclidean distances between rows of q (Q x D) and g (G x D).
Tensor distance_matrix(const Tensor& q, const Tensor& g);

struct LabelSet {
  std::vector<int> identities;
  std::vector<int> cameras;
};

/// Per query: gallery indices by ascending distance (ties by ascending
/// index) with same-identity-same-camera entries removed, and the matching
/// good flags.
struct RankingResult {
  std::vector<std::vector<int>> order;
  std::vector<std::vector<char>> good;
};

RankingResult rank_gallery(const Tensor& distances, const LabelSet& query, const LabelSet& gallery);

/// Mean over good items of the precision at their rank; nullopt when the
/// ranking holds no good item.
std::optional<double> average_precision(std::span<const char> good_in_rank_order);

/// cmc[k-1] = share of queries with a good item in their top k. Queries
/// without any good item are excluded.
std::vector<double> cmc_curve(const std::vector<std::vector<char>>& good_in_rank_order, int max_rank);

struct MetricsReport {
  std::string scenario;
  EnhancementMode enhancement_mode = EnhancementMode::Dynamic;
  double requested_missing_rate = 0.0;
  double missing_rate = 0.0;
  double mAP = 0.0;
  std::vector<double> cmc;
  int queries = 0;
  int skipped_queries = 0;
  std::string checkpoint_hash;
  std::string config_echo;

  double rank(int k) const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  void write(const std::string& path) const;
  static MetricsReport read(const std::string& path);
  /// "rank,cmc" rows for plotting.
  void write_cmc_points(const std::string& path) const;
};

MetricsReport evaluate_retrieval(const Tensor& query_embeddings, const LabelSet& query,
                                 const Tensor& gallery_embeddings, const LabelSet& gallery,
                                 int max_rank);

}  // namespace denet
