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

#include <algorithm>
#include <cmath>

#include "denet/kernels.hpp"

namespace denet::kernels::serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  for (int n = 0; n < g.batch; ++n)
    for (int oc = 0; oc < g.out_channels; ++oc)
      for (int oh = 0; oh < oh_n; ++oh)
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          for (int ic = 0; ic < g.in_channels; ++ic)
            for (int kh = 0; kh < g.kernel; ++kh) {
              const int ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.in_height) continue;
              for (int kw = 0; kw < g.kernel; ++kw) {
                const int iw = ow * g.stride - g.pad + kw;
                if (iw < 0 || iw >= g.in_width) continue;
                acc += w[((oc * g.in_channels + ic) * g.kernel + kh) * g.kernel + kw] *
                       x[((n * g.in_channels + ic) * g.in_height + ih) * g.in_width + iw];
              }
            }
          y[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow] = acc;
        }
}

// Scatter form: walks the outputs and pushes each gradient back to its inputs.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  std::fill(gx.begin(), gx.end(), 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int oc = 0; oc < g.out_channels; ++oc)
      for (int oh = 0; oh < oh_n; ++oh)
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go = gy[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow];
          for (int ic = 0; ic < g.in_channels; ++ic)
            for (int kh = 0; kh < g.kernel; ++kh) {
              const int ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.in_height) continue;
              for (int kw = 0; kw < g.kernel; ++kw) {
                const int iw = ow * g.stride - g.pad + kw;
                if (iw < 0 || iw >= g.in_width) continue;
                gx[((n * g.in_channels + ic) * g.in_height + ih) * g.in_width + iw] +=
                    go * w[((oc * g.in_channels + ic) * g.kernel + kh) * g.kernel + kw];
              }
            }
        }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  std::fill(gw.begin(), gw.end(), 0.0);
  for (int n = 0; n < g.batch; ++n)
    for (int oc = 0; oc < g.out_channels; ++oc)
      for (int oh = 0; oh < oh_n; ++oh)
        for (int ow = 0; ow < ow_n; ++ow) {
          const double go = gy[((n * g.out_channels + oc) * oh_n + oh) * ow_n + ow];
          for (int ic = 0; ic < g.in_channels; ++ic)
            for (int kh = 0; kh < g.kernel; ++kh) {
              const int ih = oh * g.stride - g.pad + kh;
              if (ih < 0 || ih >= g.in_height) continue;
              for (int kw = 0; kw < g.kernel; ++kw) {
                const int iw = ow * g.stride - g.pad + kw;
                if (iw < 0 || iw >= g.in_width) continue;
                gw[((oc * g.in_channels + ic) * g.kernel + kh) * g.kernel + kw] +=
                    go * x[((n * g.in_channels + ic) * g.in_height + ih) * g.in_width + iw];
              }
            }
        }
}

void batched_matmul(int batch, int m, int n, int k, std::span<const double> a, bool trans_a,
                    std::span<const double> b, bool trans_b, std::span<double> c) {
  for (int bi = 0; bi < batch; ++bi) {
    const double* ab = a.data() + static_cast<std::size_t>(bi) * m * k;
    const double* bb = b.data() + static_cast<std::size_t>(bi) * k * n;
    double* cb = c.data() + static_cast<std::size_t>(bi) * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) {
          const double av = trans_a ? ab[p * m + i] : ab[i * k + p];
          const double bv = trans_b ? bb[j * k + p] : bb[p * n + j];
          acc += av * bv;
        }
        cb[i * n + j] = acc;
      }
  }
}

void euclidean_distances(int q, int g, int d, std::span<const double> queries,
                         std::span<const double> gallery, std::span<double> out) {
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < g; ++j) {
      double acc = 0.0;
      for (int p = 0; p < d; ++p) {
        const double diff = queries[i * d + p] - gallery[j * d + p];
        acc += diff * diff;
      }
      out[i * g + j] = std::sqrt(acc);
    }
}

}  // namespace denet::kernels::serial
