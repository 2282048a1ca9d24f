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

#include "denet/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "denet/core.hpp"
#include "denet/kernels.hpp"

namespace denet::ops {

using ag::make_result;
using ag::Node;

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw UsageError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank)
    throw UsageError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(x.shape()));
}

bool wants(const Node& self, std::size_t i) {
  return i < self.parents.size() && self.parents[i] && self.parents[i]->requires_grad;
}

template <typename F>
Var unary(const Var& a, F&& forward_and_derivative) {
  const Tensor& x = a.value();
  Tensor y(x.shape()), dy(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) forward_and_derivative(x[i], y[i], dy[i]);
  return make_result(std::move(y), {a}, [dy = std::move(dy)](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= dy[i];
    self.parents[0]->add_grad(g);
  });
}

// Broadcast strides of `shape` against `out` (0 along broadcast axes).
std::array<std::size_t, 4> broadcast_strides(const Shape& shape, const Shape& out) {
  std::array<std::size_t, 4> strides{0, 0, 0, 0};
  std::size_t stride = 1;
  for (int axis = static_cast<int>(out.size()) - 1; axis >= 0; --axis) {
    strides[static_cast<std::size_t>(axis)] = shape[static_cast<std::size_t>(axis)] == 1 ? 0 : stride;
    stride *= static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);
  }
  return strides;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor y = a.value();
  y.accumulate(b.value());
  return make_result(std::move(y), {a, b}, [](Node& self) {
    if (wants(self, 0)) self.parents[0]->add_grad(self.grad);
    if (wants(self, 1)) self.parents[1]->add_grad(self.grad);
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || sa.size() > 4) throw UsageError("mul: rank mismatch");
  Shape out(sa.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i] != sb[i] && sa[i] != 1 && sb[i] != 1)
      throw UsageError("mul: shapes " + shape_string(sa) + " and " + shape_string(sb) +
                       " do not broadcast");
    out[i] = std::max(sa[i], sb[i]);
  }
  Shape padded = out;
  Shape pa = sa, pb = sb;
  while (padded.size() < 4) {
    padded.push_back(1);
    pa.push_back(1);
    pb.push_back(1);
  }
  const auto stride_a = broadcast_strides(pa, padded);
  const auto stride_b = broadcast_strides(pb, padded);

  auto for_each = [padded, stride_a, stride_b](auto&& fn) {
    std::size_t o = 0;
    for (int i0 = 0; i0 < padded[0]; ++i0)
      for (int i1 = 0; i1 < padded[1]; ++i1)
        for (int i2 = 0; i2 < padded[2]; ++i2)
          for (int i3 = 0; i3 < padded[3]; ++i3, ++o) {
            const std::size_t ia = i0 * stride_a[0] + i1 * stride_a[1] + i2 * stride_a[2] + i3 * stride_a[3];
            const std::size_t ib = i0 * stride_b[0] + i1 * stride_b[1] + i2 * stride_b[2] + i3 * stride_b[3];
            fn(o, ia, ib);
          }
  };

  Tensor y(out);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  for_each([&](std::size_t o, std::size_t ia, std::size_t ib) { y[o] = av[ia] * bv[ib]; });
  return make_result(std::move(y), {a, b}, [av, bv, for_each](Node& self) {
    const Tensor& g = self.grad;
    if (wants(self, 0)) {
      Tensor ga(av.shape());
      for_each([&](std::size_t o, std::size_t ia, std::size_t ib) { ga[ia] += g[o] * bv[ib]; });
      self.parents[0]->add_grad(ga);
    }
    if (wants(self, 1)) {
      Tensor gb(bv.shape());
      for_each([&](std::size_t o, std::size_t ia, std::size_t ib) { gb[ib] += g[o] * av[ia]; });
      self.parents[1]->add_grad(gb);
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double x, double& y, double& d) {
    y = x * factor;
    d = factor;
  });
}

Var add_scalar(const Var& a, double offset) {
  return unary(a, [offset](double x, double& y, double& d) {
    y = x + offset;
    d = 1.0;
  });
}

Var relu(const Var& a) {
  return unary(a, [](double x, double& y, double& d) {
    y = x > 0 ? x : 0.0;
    d = x > 0 ? 1.0 : 0.0;
  });
}

Var sigmoid(const Var& a) {
  return unary(a, [](double x, double& y, double& d) {
    y = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    d = y * (1.0 - y);
  });
}

Var tanh(const Var& a) {
  return unary(a, [](double x, double& y, double& d) {
    y = std::tanh(x);
    d = 1.0 - y * y;
  });
}

Var sum(const Var& a) {
  Shape shape = a.shape();
  return make_result(Tensor({1}, a.value().sum()), {a}, [shape](Node& self) {
    self.parents[0]->add_grad(Tensor(shape, self.grad[0]));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_height = x.dim(2);
  g.in_width = x.dim(3);
  g.out_channels = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (weight.dim(1) != g.in_channels || weight.dim(3) != g.kernel)
    throw UsageError("conv2d: weight " + shape_string(weight.shape()) + " does not match input " +
                     shape_string(x.shape()));
  if (g.out_height() <= 0 || g.out_width() <= 0) throw UsageError("conv2d: empty output");
  Tensor y({g.batch, g.out_channels, g.out_height(), g.out_width()});
  std::span<const double> b;
  if (bias.defined()) b = bias.value().values();
  kernels::parallel::conv2d_forward(g, x.value().values(), weight.value().values(), b, y.values());
  Tensor xv = x.value();
  Tensor wv = weight.value();
  return make_result(std::move(y), {x, weight, bias}, [g, xv, wv](Node& self) {
    const Tensor& gy = self.grad;
    if (wants(self, 0)) {
      Tensor gx(xv.shape());
      kernels::parallel::conv2d_backward_input(g, gy.values(), wv.values(), gx.values());
      self.parents[0]->add_grad(gx);
    }
    if (wants(self, 1)) {
      Tensor gw(wv.shape());
      kernels::parallel::conv2d_backward_weight(g, xv.values(), gy.values(), gw.values());
      self.parents[1]->add_grad(gw);
    }
    if (wants(self, 2)) {
      Tensor gb({g.out_channels});
      const int plane = g.out_height() * g.out_width();
      for (int n = 0; n < g.batch; ++n)
        for (int c = 0; c < g.out_channels; ++c)
          for (int i = 0; i < plane; ++i)
            gb[static_cast<std::size_t>(c)] += gy[(static_cast<std::size_t>(n) * g.out_channels + c) * plane + i];
      self.parents[2]->add_grad(gb);
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad,
                     int out_height, int out_width) {
  require_rank(x, 4, "conv_transpose2d");
  require_rank(weight, 4, "conv_transpose2d weight");
  // Adjoint of a conv whose input is our output and whose output is our input.
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.out_channels = x.dim(1);
  g.in_channels = weight.dim(1);
  g.in_height = out_height;
  g.in_width = out_width;
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (weight.dim(0) != g.out_channels)
    throw UsageError("conv_transpose2d: weight " + shape_string(weight.shape()) +
                     " does not match input " + shape_string(x.shape()));
  if (g.out_height() != x.dim(2) || g.out_width() != x.dim(3))
    throw UsageError("conv_transpose2d: output size inconsistent with input size");
  Tensor y({g.batch, g.in_channels, out_height, out_width});
  kernels::parallel::conv2d_backward_input(g, x.value().values(), weight.value().values(), y.values());
  if (bias.defined()) {
    const int plane = out_height * out_width;
    for (int n = 0; n < g.batch; ++n)
      for (int c = 0; c < g.in_channels; ++c)
        for (int i = 0; i < plane; ++i)
          y[(static_cast<std::size_t>(n) * g.in_channels + c) * plane + i] += bias.value()[static_cast<std::size_t>(c)];
  }
  Tensor xv = x.value();
  Tensor wv = weight.value();
  return make_result(std::move(y), {x, weight, bias}, [g, xv, wv](Node& self) {
    const Tensor& gy = self.grad;
    if (wants(self, 0)) {
      Tensor gx(xv.shape());
      kernels::parallel::conv2d_forward(g, gy.values(), wv.values(), {}, gx.values());
      self.parents[0]->add_grad(gx);
    }
    if (wants(self, 1)) {
      Tensor gw(wv.shape());
      kernels::parallel::conv2d_backward_weight(g, gy.values(), xv.values(), gw.values());
      self.parents[1]->add_grad(gw);
    }
    if (wants(self, 2)) {
      Tensor gb({g.in_channels});
      const int plane = g.in_height * g.in_width;
      for (int n = 0; n < g.batch; ++n)
        for (int c = 0; c < g.in_channels; ++c)
          for (int i = 0; i < plane; ++i)
            gb[static_cast<std::size_t>(c)] += gy[(static_cast<std::size_t>(n) * g.in_channels + c) * plane + i];
      self.parents[2]->add_grad(gb);
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const int n = x.dim(0), d = x.dim(1), e = weight.dim(0);
  if (weight.dim(1) != d) throw UsageError("linear: weight does not match input width");
  Tensor y({n, e});
  kernels::parallel::batched_matmul(1, n, e, d, x.value().values(), false, weight.value().values(),
                                    true, y.values());
  if (bias.defined())
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < e; ++j) y.at(i, j) += bias.value()[static_cast<std::size_t>(j)];
  Tensor xv = x.value();
  Tensor wv = weight.value();
  return make_result(std::move(y), {x, weight, bias}, [xv, wv, n, d, e](Node& self) {
    const Tensor& gy = self.grad;
    if (wants(self, 0)) {
      Tensor gx({n, d});
      kernels::parallel::batched_matmul(1, n, d, e, gy.values(), false, wv.values(), false, gx.values());
      self.parents[0]->add_grad(gx);
    }
    if (wants(self, 1)) {
      Tensor gw({e, d});
      kernels::parallel::batched_matmul(1, e, d, n, gy.values(), true, xv.values(), false, gw.values());
      self.parents[1]->add_grad(gw);
    }
    if (wants(self, 2)) {
      Tensor gb({e});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < e; ++j) gb[static_cast<std::size_t>(j)] += gy.at(i, j);
      self.parents[2]->add_grad(gb);
    }
  });
}

Var bmm(const Var& a, bool trans_a, const Var& b, bool trans_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const int batch = a.dim(0);
  if (b.dim(0) != batch) throw UsageError("bmm: batch mismatch");
  const int m = trans_a ? a.dim(2) : a.dim(1);
  const int k = trans_a ? a.dim(1) : a.dim(2);
  const int kb = trans_b ? b.dim(2) : b.dim(1);
  const int n = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb)
    throw UsageError("bmm: inner dimensions differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  Tensor c({batch, m, n});
  kernels::parallel::batched_matmul(batch, m, n, k, a.value().values(), trans_a, b.value().values(),
                                    trans_b, c.values());
  Tensor av = a.value();
  Tensor bv = b.value();
  return make_result(std::move(c), {a, b},
                     [av, bv, trans_a, trans_b, batch, m, n, k](Node& self) {
                       const Tensor& gc = self.grad;  // (batch, m, n)
                       if (wants(self, 0)) {
                         Tensor ga(av.shape());
                         if (!trans_a) {
                           // dA = dC * op(B)^T : (m x k)
                           kernels::parallel::batched_matmul(batch, m, k, n, gc.values(), false,
                                                             bv.values(), !trans_b, ga.values());
                         } else {
                           // A stored (k x m): dA = op(B) * dC^T
                           kernels::parallel::batched_matmul(batch, k, m, n, bv.values(), trans_b,
                                                             gc.values(), true, ga.values());
                         }
                         self.parents[0]->add_grad(ga);
                       }
                       if (wants(self, 1)) {
                         Tensor gb(bv.shape());
                         if (!trans_b) {
                           // dB = op(A)^T * dC : (k x n)
                           kernels::parallel::batched_matmul(batch, k, n, m, av.values(), !trans_a,
                                                             gc.values(), false, gb.values());
                         } else {
                           // B stored (n x k): dB = dC^T * op(A)
                           kernels::parallel::batched_matmul(batch, n, k, m, gc.values(), true,
                                                             av.values(), trans_a, gb.values());
                         }
                         self.parents[1]->add_grad(gb);
                       }
                     });
}

Var softmax_axis1(const Var& x) {
  require_rank(x, 3, "softmax_axis1");
  const int b = x.dim(0), r = x.dim(1), c = x.dim(2);
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  auto idx = [r, c](int bi, int i, int j) { return (static_cast<std::size_t>(bi) * r + i) * c + j; };
  for (int bi = 0; bi < b; ++bi)
    for (int j = 0; j < c; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < r; ++i) mx = std::max(mx, xv[idx(bi, i, j)]);
      double z = 0.0;
      for (int i = 0; i < r; ++i) z += (y[idx(bi, i, j)] = std::exp(xv[idx(bi, i, j)] - mx));
      for (int i = 0; i < r; ++i) y[idx(bi, i, j)] /= z;
    }
  Tensor yv = y;
  return make_result(std::move(y), {x}, [yv, b, r, c, idx](Node& self) {
    const Tensor& g = self.grad;
    Tensor gx(yv.shape());
    for (int bi = 0; bi < b; ++bi)
      for (int j = 0; j < c; ++j) {
        double dot = 0.0;
        for (int i = 0; i < r; ++i) dot += g[idx(bi, i, j)] * yv[idx(bi, i, j)];
        for (int i = 0; i < r; ++i) gx[idx(bi, i, j)] = yv[idx(bi, i, j)] * (g[idx(bi, i, j)] - dot);
      }
    self.parents[0]->add_grad(gx);
  });
}

Var reshape(const Var& x, Shape shape) {
  Shape original = x.shape();
  Tensor y = x.value().reshaped(std::move(shape));
  return make_result(std::move(y), {x}, [original](Node& self) {
    self.parents[0]->add_grad(self.grad.reshaped(original));
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const int rank = static_cast<int>(first.size());
  if (rank != 2 && rank != 4) throw UsageError("concat: rank 2 or 4 required");
  const int n = first[0];
  const std::size_t inner = rank == 4 ? static_cast<std::size_t>(first[2]) * first[3] : 1;
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != rank || s[0] != n ||
        (rank == 4 && (s[2] != first[2] || s[3] != first[3])))
      throw UsageError("concat: incompatible shapes");
    widths.push_back(s[1]);
    total += s[1];
  }
  Shape out = first;
  out[1] = total;
  Tensor y(out);
  int offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[p] * inner; ++j)
        y[(static_cast<std::size_t>(i) * total + offset) * inner + j] =
            v[static_cast<std::size_t>(i) * widths[p] * inner + j];
    offset += widths[p];
  }
  std::vector<Shape> shapes;
  for (const auto& p : parts) shapes.push_back(p.shape());
  return make_result(std::move(y), parts, [widths, shapes, n, inner, total](Node& self) {
    int offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (wants(self, p)) {
        Tensor g(shapes[p]);
        for (int i = 0; i < n; ++i)
          for (std::size_t j = 0; j < widths[p] * inner; ++j)
            g[static_cast<std::size_t>(i) * widths[p] * inner + j] =
                self.grad[(static_cast<std::size_t>(i) * total + offset) * inner + j];
        self.parents[p]->add_grad(g);
      }
      offset += widths[p];
    }
  });
}

Var slice_rows(const Var& x, int begin, int end) {
  const Shape& s = x.shape();
  if (begin < 0 || end > s[0] || begin >= end) throw UsageError("slice_rows: bad range");
  const std::size_t row = x.value().size() / static_cast<std::size_t>(s[0]);
  Shape out = s;
  out[0] = end - begin;
  Tensor y(out);
  std::copy_n(x.value().data() + begin * row, y.size(), y.data());
  Shape original = s;
  return make_result(std::move(y), {x}, [original, begin, row](Node& self) {
    Tensor g(original);
    std::copy_n(self.grad.data(), self.grad.size(), g.data() + begin * row);
    self.parents[0]->add_grad(g);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  Shape out = parts.front().shape();
  out[0] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out.size() || !std::equal(s.begin() + 1, s.end(), out.begin() + 1))
      throw UsageError("concat_rows: trailing shapes differ");
    out[0] += s[0];
  }
  Tensor y(out);
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    std::copy_n(p.value().data(), p.value().size(), y.data() + at);
    at += p.value().size();
  }
  std::vector<Shape> shapes;
  for (const auto& p : parts) shapes.push_back(p.shape());
  return make_result(std::move(y), parts, [shapes, offsets](Node& self) {
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      Tensor g(shapes[i]);
      std::copy_n(self.grad.data() + offsets[i], g.size(), g.data());
      self.parents[i]->add_grad(g);
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 4, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      const double* p = x.value().data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) acc += p[j];
      y.at(i, ch) = acc / static_cast<double>(plane);
    }
  Shape original = x.shape();
  return make_result(std::move(y), {x}, [original, n, c, plane](Node& self) {
    Tensor g(original);
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const double v = self.grad.at(i, ch) / static_cast<double>(plane);
        double* p = g.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) p[j] = v;
      }
    self.parents[0]->add_grad(g);
  });
}

Var global_max_pool(const Var& x) {
  require_rank(x, 4, "global_max_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, c});
  std::vector<std::size_t> argmax(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(i) * c + ch) * plane;
      std::size_t best = base;
      for (std::size_t j = 1; j < plane; ++j)
        if (x.value()[base + j] > x.value()[best]) best = base + j;
      argmax[static_cast<std::size_t>(i) * c + ch] = best;
      y.at(i, ch) = x.value()[best];
    }
  Shape original = x.shape();
  return make_result(std::move(y), {x}, [original, argmax](Node& self) {
    Tensor g(original);
    for (std::size_t k = 0; k < argmax.size(); ++k) g[argmax[k]] += self.grad[k];
    self.parents[0]->add_grad(g);
  });
}

Var channel_mean(const Var& x) {
  require_rank(x, 4, "channel_mean");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, 1, x.dim(2), x.dim(3)});
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < plane; ++j) {
      double acc = 0.0;
      for (int ch = 0; ch < c; ++ch) acc += x.value()[(static_cast<std::size_t>(i) * c + ch) * plane + j];
      y[static_cast<std::size_t>(i) * plane + j] = acc / c;
    }
  Shape original = x.shape();
  return make_result(std::move(y), {x}, [original, n, c, plane](Node& self) {
    Tensor g(original);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < plane; ++j) {
        const double v = self.grad[static_cast<std::size_t>(i) * plane + j] / c;
        for (int ch = 0; ch < c; ++ch) g[(static_cast<std::size_t>(i) * c + ch) * plane + j] = v;
      }
    self.parents[0]->add_grad(g);
  });
}

Var channel_max(const Var& x) {
  require_rank(x, 4, "channel_max");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, 1, x.dim(2), x.dim(3)});
  std::vector<std::size_t> argmax(static_cast<std::size_t>(n) * plane);
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < plane; ++j) {
      std::size_t best = static_cast<std::size_t>(i) * c * plane + j;
      for (int ch = 1; ch < c; ++ch) {
        const std::size_t k = (static_cast<std::size_t>(i) * c + ch) * plane + j;
        if (x.value()[k] > x.value()[best]) best = k;
      }
      argmax[static_cast<std::size_t>(i) * plane + j] = best;
      y[static_cast<std::size_t>(i) * plane + j] = x.value()[best];
    }
  Shape original = x.shape();
  return make_result(std::move(y), {x}, [original, argmax](Node& self) {
    Tensor g(original);
    for (std::size_t k = 0; k < argmax.size(); ++k) g[argmax[k]] += self.grad[k];
    self.parents[0]->add_grad(g);
  });
}

Var repeat_channels(const Var& x, int channels) {
  require_rank(x, 4, "repeat_channels");
  if (x.dim(1) != 1) throw UsageError("repeat_channels: input must have one channel");
  const int n = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, channels, x.dim(2), x.dim(3)});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < channels; ++ch)
      std::copy_n(x.value().data() + i * plane, plane,
                  y.data() + (static_cast<std::size_t>(i) * channels + ch) * plane);
  Shape original = x.shape();
  return make_result(std::move(y), {x}, [original, n, channels, plane](Node& self) {
    Tensor g(original);
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < channels; ++ch)
        for (std::size_t j = 0; j < plane; ++j)
          g[i * plane + j] += self.grad[(static_cast<std::size_t>(i) * channels + ch) * plane + j];
    self.parents[0]->add_grad(g);
  });
}

Var dropout(const Var& x, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(x.shape());
  const double inv = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? inv : 0.0;
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return make_result(std::move(y), {x}, [mask](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    self.parents[0]->add_grad(g);
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum, double eps) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 4) throw UsageError("batch_norm: rank 2 or 4 required");
  const int n = s[0], c = s[1];
  const std::size_t inner = s.size() == 4 ? static_cast<std::size_t>(s[2]) * s[3] : 1;
  const double count = static_cast<double>(n) * static_cast<double>(inner);
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c))
    throw UsageError("batch_norm: parameter width mismatch");
  auto at = [c, inner](int i, int ch, std::size_t j) {
    return (static_cast<std::size_t>(i) * c + ch) * inner + j;
  };
  const Tensor& xv = x.value();
  std::vector<double> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double m = 0.0;
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) m += xv[at(i, ch, j)];
      m /= count;
      double v = 0.0;
      for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) v += (xv[at(i, ch, j)] - m) * (xv[at(i, ch, j)] - m);
      v /= count;
      mean[static_cast<std::size_t>(ch)] = m;
      inv_std[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(v + eps);
      const double unbiased = count > 1 ? v * count / (count - 1) : v;
      stats.running_mean[static_cast<std::size_t>(ch)] =
          (1 - momentum) * stats.running_mean[static_cast<std::size_t>(ch)] + momentum * m;
      stats.running_var[static_cast<std::size_t>(ch)] =
          (1 - momentum) * stats.running_var[static_cast<std::size_t>(ch)] + momentum * unbiased;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[static_cast<std::size_t>(ch)] = stats.running_mean[static_cast<std::size_t>(ch)];
      inv_std[static_cast<std::size_t>(ch)] =
          1.0 / std::sqrt(stats.running_var[static_cast<std::size_t>(ch)] + eps);
    }
  }
  Tensor xhat(s), y(s);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t k = at(i, ch, j);
        xhat[k] = (xv[k] - mean[static_cast<std::size_t>(ch)]) * inv_std[static_cast<std::size_t>(ch)];
        y[k] = gamma.value()[static_cast<std::size_t>(ch)] * xhat[k] + beta.value()[static_cast<std::size_t>(ch)];
      }
  Tensor gv = gamma.value();
  return make_result(std::move(y), {x, gamma, beta},
                     [xhat, gv, inv_std, training, n, c, inner, count, at](Node& self) {
                       const Tensor& g = self.grad;
                       if (wants(self, 1) || wants(self, 2)) {
                         Tensor gg({c}), gb({c});
                         for (int i = 0; i < n; ++i)
                           for (int ch = 0; ch < c; ++ch)
                             for (std::size_t j = 0; j < inner; ++j) {
                               gg[static_cast<std::size_t>(ch)] += g[at(i, ch, j)] * xhat[at(i, ch, j)];
                               gb[static_cast<std::size_t>(ch)] += g[at(i, ch, j)];
                             }
                         if (wants(self, 1)) self.parents[1]->add_grad(gg);
                         if (wants(self, 2)) self.parents[2]->add_grad(gb);
                       }
                       if (!wants(self, 0)) return;
                       Tensor gx(xhat.shape());
                       for (int ch = 0; ch < c; ++ch) {
                         const double gamma_c = gv[static_cast<std::size_t>(ch)];
                         const double istd = inv_std[static_cast<std::size_t>(ch)];
                         if (!training) {
                           for (int i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < inner; ++j)
                               gx[at(i, ch, j)] = g[at(i, ch, j)] * gamma_c * istd;
                           continue;
                         }
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (int i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < inner; ++j) {
                             sum_g += g[at(i, ch, j)];
                             sum_gx += g[at(i, ch, j)] * xhat[at(i, ch, j)];
                           }
                         for (int i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < inner; ++j) {
                             const std::size_t k = at(i, ch, j);
                             gx[k] = gamma_c * istd * (g[k] - sum_g / count - xhat[k] * sum_gx / count);
                           }
                       }
                       self.parents[0]->add_grad(gx);
                     });
}

}  // namespace denet::ops
