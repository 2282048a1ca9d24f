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

#include <gtest/gtest.h>

#include "denet/ops.hpp"
#include "oracles.hpp"

using namespace denet;
using ag::Var;

namespace {

std::mt19937_64 rng(42);

Var param(Shape s, double scale = 1.0) { return Var(oracle::random_tensor(std::move(s), rng, scale), true); }

/// Weighted sum so every output element reaches the loss with its own weight.
Var probe(const Var& y) {
  std::mt19937_64 wrng(y.value().size());
  Var w(oracle::random_tensor(y.shape(), wrng));
  return ops::sum(ops::mul(y, w));
}

constexpr double kTol = 1e-3;

}  // namespace

TEST(OpsGrad, Elementwise) {
  auto a = param({2, 3, 2, 2}), b = param({2, 3, 2, 2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::mul(ops::sigmoid(a), ops::tanh(b))); }, {a, b}), kTol);
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::sub(ops::scale(a, 1.7), ops::add_scalar(b, 0.3))); }, {a, b}),
            kTol);
  EXPECT_LT(oracle::gradient_check([&] { return ops::mean(ops::relu(ops::add(a, b))); }, {a, b}), kTol);
}

TEST(OpsGrad, BroadcastMultiply) {
  auto x = param({2, 3, 4, 2}), gate_c = param({2, 3, 1, 1}), gate_s = param({2, 1, 4, 2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::mul(ops::mul(x, gate_c), gate_s)); }, {x, gate_c, gate_s}),
            kTol);
}

TEST(OpsGrad, Convolutions) {
  auto x = param({2, 3, 6, 4}), w = param({4, 3, 3, 3}, 0.3), b = param({4});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::conv2d(x, w, b, 2, 1)); }, {x, w, b}), kTol);
  auto z = param({2, 4, 3, 2}), wt = param({4, 2, 4, 4}, 0.3), bt = param({2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::conv_transpose2d(z, wt, bt, 2, 1, 6, 4)); }, {z, wt, bt}),
            kTol);
}

TEST(Ops, TransposedConvDoublesSpatialSize) {
  auto z = param({1, 2, 3, 5});
  auto wt = param({2, 3, 4, 4});
  auto y = ops::conv_transpose2d(z, wt, Var(), 2, 1, 6, 10);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 6, 10}));
}

TEST(OpsGrad, LinearAndBmm) {
  auto x = param({3, 5}), w = param({4, 5}), b = param({4});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::linear(x, w, b)); }, {x, w, b}), kTol);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = param(ta ? Shape{2, 3, 4} : Shape{2, 4, 3});
      auto c = param(tb ? Shape{2, 5, 3} : Shape{2, 3, 5});
      EXPECT_LT(oracle::gradient_check([&] { return probe(ops::bmm(a, ta, c, tb)); }, {a, c}), kTol)
          << ta << tb;
    }
}

TEST(OpsGrad, SoftmaxAndShapes) {
  auto x = param({2, 4, 3});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::softmax_axis1(x)); }, {x}), kTol);
  auto a = param({2, 3, 2, 2}), b = param({2, 1, 2, 2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::reshape(ops::concat({a, b}), {2, 16})); }, {a, b}), kTol);
  auto r = param({5, 3}), q = param({2, 3});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::slice_rows(r, 1, 4)); }, {r}), kTol);
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::concat_rows({r, q})); }, {r, q}), kTol);
  EXPECT_EQ(ops::concat_rows({r, q}).shape(), (Shape{7, 3}));
  EXPECT_THROW(ops::concat_rows({r, param({2, 4})}), UsageError);
}

TEST(Ops, SoftmaxColumnsSumToOne) {
  auto y = ops::softmax_axis1(param({2, 4, 3}, 3.0));
  for (int n = 0; n < 2; ++n)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += y.value()[static_cast<std::size_t>((n * 4 + i) * 3 + j)];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(OpsGrad, Pooling) {
  auto x = param({2, 3, 3, 2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::global_avg_pool(x)); }, {x}), kTol);
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::global_max_pool(x)); }, {x}), kTol);
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::channel_mean(x)); }, {x}), kTol);
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::channel_max(x)); }, {x}), kTol);
  auto s = param({2, 1, 3, 2});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::repeat_channels(s, 3)); }, {s}), kTol);
}

TEST(OpsGrad, BatchNormTraining) {
  auto x = param({4, 3, 2, 2}), gamma = param({3}), beta = param({3});
  ops::BatchNormStats stats{Tensor({3}), Tensor({3})};
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::batch_norm(x, gamma, beta, stats, true)); },
                                   {x, gamma, beta}),
            kTol);
  auto v = param({5, 3});
  EXPECT_LT(oracle::gradient_check([&] { return probe(ops::batch_norm(v, gamma, beta, stats, true)); }, {v}), kTol);
}

TEST(Ops, BatchNormRunningStatistics) {
  Tensor x({4, 1}, {1.0, 2.0, 3.0, 6.0});
  Tensor ones({1}, {1.0}), zeros({1}, {0.0});
  ops::BatchNormStats stats{Tensor({1}, {0.0}), Tensor({1}, {1.0})};
  auto y = ops::batch_norm(Var(x), Var(ones), Var(zeros), stats, true, 0.1, 0.0);
  // mean 3, biased var 3.5, unbiased var 14/3
  EXPECT_NEAR(stats.running_mean[0], 0.3, 1e-12);
  EXPECT_NEAR(stats.running_var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
  EXPECT_NEAR(y.value()[3], 3.0 / std::sqrt(3.5), 1e-12);
  auto e = ops::batch_norm(Var(x), Var(ones), Var(zeros), stats, false, 0.1, 0.0);
  EXPECT_NEAR(e.value()[0], (1.0 - 0.3) / std::sqrt(stats.running_var[0]), 1e-12);
}

TEST(Ops, DropoutIsInvertedAndOffInEval) {
  std::mt19937_64 r(1);
  Var x(Tensor({1000}, std::vector<double>(1000, 1.0)));
  auto y = ops::dropout(x, 0.5, true, r);
  int zero = 0;
  for (double v : y.value().values()) {
    if (v == 0.0) {
      ++zero;
    } else {
      EXPECT_DOUBLE_EQ(v, 2.0);
    }
  }
  EXPECT_GT(zero, 400);
  EXPECT_LT(zero, 600);
  auto e = ops::dropout(x, 0.5, false, r);
  EXPECT_EQ(e.value().values()[0], 1.0);
}

TEST(Autograd, NoGradGuardSkipsTape) {
  auto a = param({3});
  {
    ag::NoGradGuard guard;
    auto y = ops::scale(a, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ops::scale(a, 2.0).requires_grad());
}

TEST(Autograd, GradientsAccumulateThroughSharedNodes) {
  Var a(Tensor({1}, {3.0}), true);
  auto y = ops::add(ops::mul(a, a), a);  // a^2 + a
  ag::backward(ops::sum(y));
  EXPECT_DOUBLE_EQ(a.grad()[0], 7.0);
  auto d = ag::detach(a);
  EXPECT_FALSE(d.requires_grad());
}
