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

// Independent reference implementations used by the unit and acceptance
// tests. Written as plain loops over raw values and never calling into the
// library's ops, so agreement checks two separate routes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "denet/autograd.hpp"
#include "denet/dem.hpp"
#include "denet/tensor.hpp"

namespace oracle {

using denet::Tensor;

inline Tensor random_tensor(denet::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

/// 1x1 convolution: out[n,o,h,w] = b[o] + sum_c W[o,c] x[n,c,h,w].
inline Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0);
  Tensor out({n, o, h, wd});
  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < o; ++oc)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < c; ++ic) s += w.at(oc, ic, 0, 0) * x.at(i, ic, y, xx);
          out.at(i, oc, y, xx) = s;
        }
  return out;
}

/// Cross-feature enhancement written position by position:
///   A[i][j] = sum_c q[c,i] k[c,j]           (i source position, j target)
///   (softmax over i when requested)
///   agg[c,j] = sum_i v[c,i] A[i][j]
///   out = f_t + proj(agg)
inline Tensor enhance(const denet::EnhancementEdge& edge, const Tensor& fs, const Tensor& ft, bool softmax) {
  const Tensor q = conv1x1(fs, edge.source_query.weight.value(), edge.source_query.bias.value());
  const Tensor v = conv1x1(fs, edge.source_value.weight.value(), edge.source_value.bias.value());
  const Tensor k = conv1x1(ft, edge.target_key.weight.value(), edge.target_key.bias.value());
  const int n = fs.dim(0), cr = q.dim(1), h = fs.dim(2), w = fs.dim(3), hw = h * w;
  Tensor agg({n, cr, h, w});
  for (int b = 0; b < n; ++b) {
    std::vector<double> a(static_cast<std::size_t>(hw * hw));
    for (int i = 0; i < hw; ++i)
      for (int j = 0; j < hw; ++j) {
        double s = 0.0;
        for (int c = 0; c < cr; ++c) s += q.at(b, c, i / w, i % w) * k.at(b, c, j / w, j % w);
        a[static_cast<std::size_t>(i * hw + j)] = s;
      }
    if (softmax)
      for (int j = 0; j < hw; ++j) {
        double mx = -1e300, z = 0.0;
        for (int i = 0; i < hw; ++i) mx = std::max(mx, a[static_cast<std::size_t>(i * hw + j)]);
        for (int i = 0; i < hw; ++i) z += std::exp(a[static_cast<std::size_t>(i * hw + j)] - mx);
        for (int i = 0; i < hw; ++i)
          a[static_cast<std::size_t>(i * hw + j)] = std::exp(a[static_cast<std::size_t>(i * hw + j)] - mx) / z;
      }
    for (int c = 0; c < cr; ++c)
      for (int j = 0; j < hw; ++j) {
        double s = 0.0;
        for (int i = 0; i < hw; ++i) s += v.at(b, c, i / w, i % w) * a[static_cast<std::size_t>(i * hw + j)];
        agg.at(b, c, j / w, j % w) = s;
      }
  }
  Tensor out = conv1x1(agg, edge.output.weight.value(), edge.output.bias.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += ft[i];
  return out;
}

/// AP by definition: the ranked list is scanned once; precision is taken at
/// each relevant position and averaged over the relevant count.
inline double average_precision(const std::vector<double>& distances, const std::vector<int>& ids,
                                const std::vector<int>& cams, int query_id, int query_cam, bool* has_good) {
  std::vector<int> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return distances[a] < distances[b]; });
  int hits = 0, seen = 0;
  double sum = 0.0;
  for (int g : order) {
    if (ids[g] == query_id && cams[g] == query_cam) continue;  // junk
    ++seen;
    if (ids[g] == query_id) {
      ++hits;
      sum += static_cast<double>(hits) / seen;
    }
  }
  *has_good = hits > 0;
  return hits ? sum / hits : 0.0;
}

/// Position (1-based) of the first good match after junk removal, 0 if none.
inline int first_hit_rank(const std::vector<double>& distances, const std::vector<int>& ids,
                          const std::vector<int>& cams, int query_id, int query_cam) {
  std::vector<int> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return distances[a] < distances[b]; });
  int seen = 0;
  for (int g : order) {
    if (ids[g] == query_id && cams[g] == query_cam) continue;
    ++seen;
    if (ids[g] == query_id) return seen;
  }
  return 0;
}

/// Largest relative error between analytic gradients of `loss` with respect
/// to `inputs` and central differences. Relative error uses
/// |a - n| / max(1e-6 + |a| + |n|) scaled per input tensor.
inline double gradient_check(const std::function<denet::ag::Var()>& loss, std::vector<denet::ag::Var> inputs,
                             double step = 1e-5) {
  for (auto& v : inputs) v.clear_grad();
  denet::ag::backward(loss());
  double worst = 0.0;
  for (auto& v : inputs) {
    Tensor analytic = v.has_grad() ? v.grad() : Tensor(v.shape());
    Tensor& value = v.mutable_value();
    double scale = 0.0;
    std::vector<double> numeric(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + step;
      const double up = loss().value()[0];
      value[i] = keep - step;
      const double down = loss().value()[0];
      value[i] = keep;
      numeric[i] = (up - down) / (2 * step);
      scale = std::max({scale, std::abs(numeric[i]), std::abs(analytic[i])});
    }
    for (std::size_t i = 0; i < value.size(); ++i)
      worst = std::max(worst, std::abs(numeric[i] - analytic[i]) / std::max(scale, 1e-6));
  }
  return worst;
}

}  // namespace oracle
