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

#include "denet/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <iomanip>

#include "denet/core.hpp"

namespace denet {

double triplet_loss(double d_ap, double d_an, double margin) {
  return std::max(d_ap - d_an + margin, 0.0);
}

namespace {

void check_labels(std::span<const int> labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw UsageError("batch_hard_mine: batch holds a single identity");
  for (const auto& [label, count] : counts)
    if (count < 2)
      throw UsageError("batch_hard_mine: identity " + std::to_string(label) +
                       " has one sample (sampler contract violated)");
}

double row_distance(const Tensor& e, int i, int j) {
  const int d = e.dim(1);
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = e.at(i, k) - e.at(j, k);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

std::vector<MinedPair> batch_hard_mine(const Tensor& embeddings, std::span<const int> labels) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != static_cast<int>(labels.size()))
    throw UsageError("batch_hard_mine: embeddings must be (B, D) with B labels");
  check_labels(labels);
  const int b = embeddings.dim(0);
  std::vector<MinedPair> out;
  out.reserve(static_cast<std::size_t>(b));
  for (int a = 0; a < b; ++a) {
    MinedPair m{-1.0, std::numeric_limits<double>::infinity(), -1, -1};
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      const double d = row_distance(embeddings, a, j);
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)]) {
        if (d > m.d_ap) {
          m.d_ap = d;
          m.positive = j;
        }
      } else if (d < m.d_an) {
        m.d_an = d;
        m.negative = j;
      }
    }
    out.push_back(m);
  }
  return out;
}

double smoothed_ce(std::span<const double> logits, int label, double beta) {
  const int n = static_cast<int>(logits.size());
  if (label < 0 || label >= n) throw UsageError("smoothed_ce: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = std::log(z) + mx;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double q = (i == label ? 1.0 - beta : 0.0) + beta / n;
    loss -= q * (logits[static_cast<std::size_t>(i)] - log_z);
  }
  return loss;
}

ag::Var batch_hard_triplet(const ag::Var& embeddings, std::span<const int> labels, double margin) {
  const Tensor& e = embeddings.value();
  auto mined = batch_hard_mine(e, labels);
  const int b = e.dim(0), d = e.dim(1);
  double acc = 0.0;
  for (const auto& m : mined) acc += triplet_loss(m.d_ap, m.d_an, margin);
  return ag::make_result(Tensor({1}, acc / b), {embeddings}, [e, mined, margin, b, d](ag::Node& self) {
    const double g = self.grad[0] / b;
    Tensor ge(e.shape());
    // d||x_i - x_j|| / dx_i = (x_i - x_j) / ||x_i - x_j||, zero at coincidence.
    auto push = [&](int i, int j, double dist, double sign) {
      if (dist <= 0.0) return;
      for (int k = 0; k < d; ++k) {
        const double u = (e.at(i, k) - e.at(j, k)) / dist * sign * g;
        ge.at(i, k) += u;
        ge.at(j, k) -= u;
      }
    };
    for (int a = 0; a < b; ++a) {
      const auto& m = mined[static_cast<std::size_t>(a)];
      if (m.d_ap - m.d_an + margin <= 0.0) continue;
      push(a, m.positive, m.d_ap, 1.0);
      push(a, m.negative, m.d_an, -1.0);
    }
    self.parents[0]->add_grad(ge);
  });
}

ag::Var smoothed_cross_entropy(const ag::Var& logits, std::span<const int> labels, double beta) {
  const Tensor& x = logits.value();
  if (x.rank() != 2 || x.dim(0) != static_cast<int>(labels.size()))
    throw UsageError("smoothed_cross_entropy: logits must be (B, N) with B labels");
  const int b = x.dim(0), n = x.dim(1);
  Tensor probs(x.shape());
  double acc = 0.0;
  for (int i = 0; i < b; ++i) {
    std::span<const double> row(x.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n));
    acc += smoothed_ce(row, labels[static_cast<std::size_t>(i)], beta);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (int k = 0; k < n; ++k) z += (probs.at(i, k) = std::exp(row[static_cast<std::size_t>(k)] - mx));
    for (int k = 0; k < n; ++k) probs.at(i, k) /= z;
  }
  std::vector<int> y(labels.begin(), labels.end());
  return ag::make_result(Tensor({1}, acc / b), {logits}, [probs, y, beta, b, n](ag::Node& self) {
    const double g = self.grad[0] / b;
    Tensor gx(probs.shape());
    // d/dz of -sum q log softmax(z) = softmax(z) - q (q sums to one).
    for (int i = 0; i < b; ++i)
      for (int k = 0; k < n; ++k) {
        const double q = (k == y[static_cast<std::size_t>(i)] ? 1.0 - beta : 0.0) + beta / n;
        gx.at(i, k) = (probs.at(i, k) - q) * g;
      }
    self.parents[0]->add_grad(gx);
  });
}

std::string LossReport::to_json_fields() const {
  std::ostringstream os;
  os << std::setprecision(17) << "\"l_tri\":" << l_tri << ",\"l_ce\":" << l_ce
     << ",\"l_rec\":" << l_rec << ",\"l_sim\":" << l_sim << ",\"total\":" << total;
  return os.str();
}

LossReport total_loss(const LossParts& parts, double rho, double mu) {
  for (double v : {parts.l_tri, parts.l_ce, parts.l_rec, parts.l_sim})
    if (!std::isfinite(v)) throw InvariantError("non-finite loss component");
  LossReport r;
  r.l_tri = parts.l_tri;
  r.l_ce = parts.l_ce;
  r.l_rec = parts.l_rec;
  r.l_sim = parts.l_sim;
  r.total = parts.l_tri + parts.l_ce + rho * parts.l_rec + mu * parts.l_sim;
  return r;
}

ClassifierHead ClassifierHead::create(nn::ParameterStore& store, const std::string& prefix, int dim,
                                      int classes, std::mt19937_64& rng) {
  ClassifierHead head;
  head.neck = nn::BatchNorm::create(store, prefix + "/neck", dim);
  head.classifier = nn::Linear::create(store, prefix + "/classifier", dim, classes, false, rng);
  // Small classifier init keeps the first logits near uniform.
  for (auto& v : head.classifier.weight.mutable_value().values()) v *= 0.05;
  return head;
}

}  // namespace denet
