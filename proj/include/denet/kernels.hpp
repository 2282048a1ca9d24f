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

// Numeric hot loops. Every kernel exists twice: `serial` is the plain
// reference kept for tests, `parallel` is the OpenMP version used by the
// autograd ops. Parallel kernels only split over independent outputs, so a
// result never depends on the thread count.

namespace denet::kernels {

struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
};

// Conventions (all NCHW, weight OIHW):
//   forward:         y  = conv(x, w) + bias        (bias may be empty)
//   backward_input:  gx = conv^T(gy, w)            (overwrites gx)
//   backward_weight: gw = sum_n,pos gy * x         (overwrites gw)
// Transposed convolution reuses backward_input as its forward pass.

namespace serial {
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw);
/// c[b] = op(a[b]) * op(b[b]); op(a) is M x K, op(b) is K x N.
void batched_matmul(int batch, int m, int n, int k, std::span<const double> a, bool trans_a,
                    std::span<const double> b, bool trans_b, std::span<double> c);
/// out[i*G + j] = ||q_i - g_j||_2
void euclidean_distances(int q, int g, int d, std::span<const double> queries,
                         std::span<const double> gallery, std::span<double> out);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> w, std::span<double> gx);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw);
void batched_matmul(int batch, int m, int n, int k, std::span<const double> a, bool trans_a,
                    std::span<const double> b, bool trans_b, std::span<double> c);
void euclidean_distances(int q, int g, int d, std::span<const double> queries,
                         std::span<const double> gallery, std::span<double> out);
}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace denet::kernels
