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
#include <vector>

#include "denet/autograd.hpp"

// Differentiable tensor operations over the autograd graph. Image-like
// tensors are NCHW, vectors are (N, D).

namespace denet::ops {

using ag::Var;

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product; either operand may broadcast along size-1 axes.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

/// Square kernels; `bias` may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// Weight layout (in, out, k, k); output spatial size is given explicitly.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad,
                     int out_height, int out_width);

/// x (N, D) times weight (E, D)^T plus bias (E).
Var linear(const Var& x, const Var& weight, const Var& bias);
/// 3-D batched product with optional transposes of either operand.
Var bmm(const Var& a, bool trans_a, const Var& b, bool trans_b);
/// Softmax along axis 1 of a rank-3 tensor.
Var softmax_axis1(const Var& x);

Var reshape(const Var& x, Shape shape);
/// Concatenation along axis 1 (rank 2 or rank 4 inputs).
Var concat(const std::vector<Var>& parts);
/// Rows [begin, end) along axis 0.
Var slice_rows(const Var& x, int begin, int end);
/// Concatenation along axis 0; trailing dimensions must agree.
Var concat_rows(const std::vector<Var>& parts);

Var global_avg_pool(const Var& x);  // (N,C,H,W) -> (N,C)
Var global_max_pool(const Var& x);  // (N,C,H,W) -> (N,C)
Var channel_mean(const Var& x);     // (N,C,H,W) -> (N,1,H,W)
Var channel_max(const Var& x);      // (N,C,H,W) -> (N,1,H,W)

/// Repeats a (N,1,H,W) tensor to (N,C,H,W).
Var repeat_channels(const Var& x, int channels);

/// Inverted dropout; identity when `training` is false or p == 0.
Var dropout(const Var& x, double p, bool training, std::mt19937_64& rng);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

/// Per-channel batch normalization over every axis except 1.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum = 0.1, double eps = 1e-5);

}  // namespace denet::ops
