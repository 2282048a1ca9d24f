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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "denet/kernels.hpp"

namespace k = denet::kernels;

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(n);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

k::ConvGeometry geometry(const benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  return {8, c, 32, 16, 2 * c, 3, 1, 1};
}

template <auto Fn>
void conv_forward(benchmark::State& state) {
  const auto g = geometry(state);
  auto x = random_values(static_cast<std::size_t>(g.batch * g.in_channels * g.in_height * g.in_width));
  auto w = random_values(static_cast<std::size_t>(g.out_channels * g.in_channels * 9));
  auto b = random_values(static_cast<std::size_t>(g.out_channels));
  std::vector<double> y(static_cast<std::size_t>(g.batch * g.out_channels * g.out_height() * g.out_width()));
  for (auto _ : state) {
    Fn(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void conv_backward_input(benchmark::State& state) {
  const auto g = geometry(state);
  auto gy = random_values(static_cast<std::size_t>(g.batch * g.out_channels * g.out_height() * g.out_width()));
  auto w = random_values(static_cast<std::size_t>(g.out_channels * g.in_channels * 9));
  std::vector<double> gx(static_cast<std::size_t>(g.batch * g.in_channels * g.in_height * g.in_width));
  for (auto _ : state) {
    Fn(g, gy, w, gx);
    benchmark::DoNotOptimize(gx.data());
  }
}

template <auto Fn>
void conv_backward_weight(benchmark::State& state) {
  const auto g = geometry(state);
  auto x = random_values(static_cast<std::size_t>(g.batch * g.in_channels * g.in_height * g.in_width));
  auto gy = random_values(static_cast<std::size_t>(g.batch * g.out_channels * g.out_height() * g.out_width()));
  std::vector<double> gw(static_cast<std::size_t>(g.out_channels * g.in_channels * 9));
  for (auto _ : state) {
    Fn(g, x, gy, gw);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <auto Fn>
void matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto a = random_values(static_cast<std::size_t>(8 * n * n)), b = random_values(static_cast<std::size_t>(8 * n * n));
  std::vector<double> c(static_cast<std::size_t>(8 * n * n));
  for (auto _ : state) {
    Fn(8, n, n, n, a, true, b, false, c);
    benchmark::DoNotOptimize(c.data());
  }
}

template <auto Fn>
void distances(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), d = 192;
  auto q = random_values(static_cast<std::size_t>(n * d)), g = random_values(static_cast<std::size_t>(4 * n * d));
  std::vector<double> out(static_cast<std::size_t>(4 * n * n));
  for (auto _ : state) {
    Fn(n, 4 * n, d, q, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(conv_forward<k::serial::conv2d_forward>)->Name("conv_forward/serial")->Arg(8)->Arg(32);
BENCHMARK(conv_forward<k::parallel::conv2d_forward>)->Name("conv_forward/parallel")->Arg(8)->Arg(32);
BENCHMARK(conv_backward_input<k::serial::conv2d_backward_input>)->Name("conv_backward_input/serial")->Arg(8)->Arg(32);
BENCHMARK(conv_backward_input<k::parallel::conv2d_backward_input>)->Name("conv_backward_input/parallel")->Arg(8)->Arg(32);
BENCHMARK(conv_backward_weight<k::serial::conv2d_backward_weight>)->Name("conv_backward_weight/serial")->Arg(8)->Arg(32);
BENCHMARK(conv_backward_weight<k::parallel::conv2d_backward_weight>)->Name("conv_backward_weight/parallel")->Arg(8)->Arg(32);
BENCHMARK(matmul<k::serial::batched_matmul>)->Name("batched_matmul/serial")->Arg(16)->Arg(64);
BENCHMARK(matmul<k::parallel::batched_matmul>)->Name("batched_matmul/parallel")->Arg(16)->Arg(64);
BENCHMARK(distances<k::serial::euclidean_distances>)->Name("euclidean_distances/serial")->Arg(40)->Arg(160);
BENCHMARK(distances<k::parallel::euclidean_distances>)->Name("euclidean_distances/parallel")->Arg(40)->Arg(160);

BENCHMARK_MAIN();
