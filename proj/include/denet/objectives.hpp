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

#include <span>
#include <string>
#include <vector>

#include "denet/autograd.hpp"
#include "denet/nn.hpp"

namespace denet {

/// max(d_ap - d_an + margin, 0)
double triplet_loss(double d_ap, double d_an, double margin);

struct MinedPair {
  double d_ap;  // hardest (farthest) positive
  double d_an;  // hardest (closest) negative
  int positive;
  int negative;
};

/// Batch-hard mining over Euclidean distances of the rows of `embeddings`.
/// Throws UsageError when an identity has a single sample or the batch holds
/// one identity only.
std::vector<MinedPair> batch_hard_mine(const Tensor& embeddings, std::span<const int> labels);

/// Cross-entropy of softmax(logits) against the smoothed target
/// q_i = (1 - beta) [i == y] + beta / N.
double smoothed_ce(std::span<const double> logits, int label, double beta);

/// Differentiable batch means of the two ReID losses.
ag::Var batch_hard_triplet(const ag::Var& embeddings, std::span<const int> labels, double margin);
ag::Var smoothed_cross_entropy(const ag::Var& logits, std::span<const int> labels, double beta);

struct LossParts {
  double l_tri = 0.0;
  double l_ce = 0.0;
  double l_rec = 0.0;
  double l_sim = 0.0;
};

struct LossReport {
  double l_tri = 0.0;
  double l_ce = 0.0;
  double l_rec = 0.0;
  double l_sim = 0.0;
  double total = 0.0;

  double l_reid() const { return l_tri + l_ce; }
  /// {"l_tri":..,"l_ce":..,"l_rec":..,"l_sim":..,"total":..} in that order.
  std::string to_json_fields() const;
};

/// total = l_tri + l_ce + rho * l_rec + mu * l_sim. Throws InvariantError on
/// a non-finite part.
LossReport total_loss(const LossParts& parts, double rho, double mu);

/// BN neck plus bias-free identity classifier over the final embedding.
struct ClassifierHead {
  nn::BatchNorm neck;
  nn::Linear classifier;

  static ClassifierHead create(nn::ParameterStore& store, const std::string& prefix, int dim,
                               int classes, std::mt19937_64& rng);
  /// Post-BN feature; triplet losses use the pre-BN input instead.
  ag::Var normalize(const ag::Var& embedding, bool training) const { return neck(embedding, training); }
  ag::Var logits(const ag::Var& normalized) const { return classifier(normalized); }
};

}  // namespace denet
