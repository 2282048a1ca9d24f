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
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "denet/kernels.hpp"

namespace denet::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  const int ksz = g.kernel * g.kernel;
  const int planes = g.batch * g.out_channels;
  const double* xp = x.data();
  const double* wp = w.data();
  double* yp = y.data();
#pragma omp parallel for schedule(static)
  for (int plane = 0; plane < planes; ++plane) {
    const int n = plane / g.out_channels;
    const int oc = plane % g.out_channels;
    const double b = bias.empty() ? 0.0 : bias[oc];
    const double* wo = wp + static_cast<std::size_t>(oc) * g.in_channels * ksz;
    const double* xn = xp + static_cast<std::size_t>(n) * g.in_channels * g.in_height * g.in_width;
    double* yo = yp + static_cast<std::size_t>(plane) * oh_n * ow_n;
    for (int oh = 0; oh < oh_n; ++oh) {
      const int ih0 = oh * g.stride - g.pad;
      const int kh_lo = std::max(0, -ih0), kh_hi = std::min(g.kernel, g.in_height - ih0);
      for (int ow = 0; ow < ow_n; ++ow) {
        const int iw0 = ow * g.stride - g.pad;
        const int kw_lo = std::max(0, -iw0), kw_hi = std::min(g.kernel, g.in_width - iw0);
        double acc = b;
        for (int ic = 0; ic < g.in_channels; ++ic) {
          const double* wk = wo + ic * ksz;
          const double* xc = xn + static_cast<std::size_t>(ic) * g.in_height * g.in_width;
          for (int kh = kh_lo; kh < kh_hi; ++kh) {
            const double* xr = xc + (ih0 + kh) * g.in_width + iw0;
            const double* wr = wk + kh * g.kernel;
            for (int kw = kw_lo; kw < kw_hi; ++kw) acc += wr[kw] * xr[kw];
          }
        }
        yo[oh * ow_n + ow] = acc;
      }
    }
  }
}

// Gather form: each input gradient is owned by exactly one iteration.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  const int ksz = g.kernel * g.kernel;
  const int planes = g.batch * g.in_channels;
  const double* gyp = gy.data();
  const double* wp = w.data();
  double* gxp = gx.data();
#pragma omp parallel for schedule(static)
  for (int plane = 0; plane < planes; ++plane) {
    const int n = plane / g.in_channels;
    const int ic = plane % g.in_channels;
    double* gxo = gxp + static_cast<std::size_t>(plane) * g.in_height * g.in_width;
    for (int ih = 0; ih < g.in_height; ++ih)
      for (int iw = 0; iw < g.in_width; ++iw) {
        double acc = 0.0;
        for (int oc = 0; oc < g.out_channels; ++oc) {
          const double* wk = wp + (static_cast<std::size_t>(oc) * g.in_channels + ic) * ksz;
          const double* go = gyp + (static_cast<std::size_t>(n) * g.out_channels + oc) * oh_n * ow_n;
          for (int kh = 0; kh < g.kernel; ++kh) {
            const int t = ih + g.pad - kh;
            if (t < 0 || t % g.stride != 0) continue;
            const int oh = t / g.stride;
            if (oh >= oh_n) continue;
            for (int kw = 0; kw < g.kernel; ++kw) {
              const int u = iw + g.pad - kw;
              if (u < 0 || u % g.stride != 0) continue;
              const int ow = u / g.stride;
              if (ow >= ow_n) continue;
              acc += go[oh * ow_n + ow] * wk[kh * g.kernel + kw];
            }
          }
        }
        gxo[ih * g.in_width + iw] = acc;
      }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw) {
  const int oh_n = g.out_height(), ow_n = g.out_width();
  const int ksz = g.kernel * g.kernel;
  const int pairs = g.out_channels * g.in_channels;
  const double* xp = x.data();
  const double* gyp = gy.data();
  double* gwp = gw.data();
#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < pairs; ++pair) {
    const int oc = pair / g.in_channels;
    const int ic = pair % g.in_channels;
    double* gk = gwp + static_cast<std::size_t>(pair) * ksz;
    for (int kh = 0; kh < g.kernel; ++kh)
      for (int kw = 0; kw < g.kernel; ++kw) {
        double acc = 0.0;
        for (int n = 0; n < g.batch; ++n) {
          const double* go = gyp + (static_cast<std::size_t>(n) * g.out_channels + oc) * oh_n * ow_n;
          const double* xc =
              xp + (static_cast<std::size_t>(n) * g.in_channels + ic) * g.in_height * g.in_width;
          for (int oh = 0; oh < oh_n; ++oh) {
            const int ih = oh * g.stride - g.pad + kh;
            if (ih < 0 || ih >= g.in_height) continue;
            for (int ow = 0; ow < ow_n; ++ow) {
              const int iw = ow * g.stride - g.pad + kw;
              if (iw < 0 || iw >= g.in_width) continue;
              acc += go[oh * ow_n + ow] * xc[ih * g.in_width + iw];
            }
          }
        }
        gk[kh * g.kernel + kw] = acc;
      }
  }
}

void batched_matmul(int batch, int m, int n, int k, std::span<const double> a, bool trans_a,
                    std::span<const double> b, bool trans_b, std::span<double> c) {
  const int rows = batch * m;
#pragma omp parallel for schedule(static)
  for (int row = 0; row < rows; ++row) {
    const int bi = row / m, i = row % m;
    const double* ab = a.data() + static_cast<std::size_t>(bi) * m * k;
    const double* bb = b.data() + static_cast<std::size_t>(bi) * k * n;
    double* cr = c.data() + static_cast<std::size_t>(bi) * m * n + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = trans_a ? ab[p * m + i] : ab[i * k + p];
        const double bv = trans_b ? bb[j * k + p] : bb[p * n + j];
        acc += av * bv;
      }
      cr[j] = acc;
    }
  }
}

void euclidean_distances(int q, int g, int d, std::span<const double> queries,
                         std::span<const double> gallery, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < q; ++i) {
    const double* qi = queries.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < g; ++j) {
      const double* gj = gallery.data() + static_cast<std::size_t>(j) * d;
      double acc = 0.0;
      for (int p = 0; p < d; ++p) {
        const double diff = qi[p] - gj[p];
        acc += diff * diff;
      }
      out[static_cast<std::size_t>(i) * g + j] = std::sqrt(acc);
    }
  }
}

}  // namespace parallel
}  // namespace denet::kernels
