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

#include "denet/nn.hpp"

#include <cmath>

#include "denet/core.hpp"

namespace denet::nn {

Var ParameterStore::add(const std::string& name, Tensor init, bool decay) {
  if (find(name) != nullptr) throw InvariantError("duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  p.momentum = Tensor::zeros_like(init);
  p.var = Var(std::move(init), true);
  p.decay = decay;
  params_.push_back(std::move(p));
  return params_.back().var;
}

ops::BatchNormStats& ParameterStore::add_stats(const std::string& name, int channels) {
  stats_.emplace_back(name, ops::BatchNormStats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)});
  return stats_.back().second;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<std::pair<std::string, Tensor*>> ParameterStore::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& p : params_) out.emplace_back(p.name, &p.var.mutable_value());
  for (auto& [name, s] : stats_) {
    out.emplace_back(name + "/running_mean", &s.running_mean);
    out.emplace_back(name + "/running_var", &s.running_var);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ParameterStore::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& p : params_) out.emplace_back(p.name, &p.var.value());
  for (const auto& [name, s] : stats_) {
    out.emplace_back(name + "/running_mean", &s.running_mean);
    out.emplace_back(name + "/running_var", &s.running_var);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.clear_grad();
}

void ParameterStore::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& p : params_)
    if (p.name.rfind(prefix, 0) == 0) p.frozen = frozen;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

Tensor he_normal(Shape shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / std::max(1, fan_in)));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Conv2d Conv2d::create(ParameterStore& store, const std::string& prefix, int in, int out, int kernel,
                      int stride, int pad, bool with_bias, std::mt19937_64& rng) {
  Conv2d conv;
  conv.weight = store.add(prefix + "/weight", he_normal({out, in, kernel, kernel}, in * kernel * kernel, rng));
  if (with_bias) conv.bias = store.add(prefix + "/bias", Tensor({out}), false);
  conv.stride = stride;
  conv.pad = pad;
  return conv;
}

ConvTranspose2d ConvTranspose2d::create(ParameterStore& store, const std::string& prefix, int in,
                                        int out, int kernel, int stride, int pad, bool with_bias,
                                        std::mt19937_64& rng) {
  ConvTranspose2d conv;
  // Each output sees about in * (kernel/stride)^2 inputs.
  const int fan_in = std::max(1, in * (kernel / stride) * (kernel / stride));
  conv.weight = store.add(prefix + "/weight", he_normal({in, out, kernel, kernel}, fan_in, rng));
  if (with_bias) conv.bias = store.add(prefix + "/bias", Tensor({out}), false);
  conv.stride = stride;
  conv.pad = pad;
  return conv;
}

Var ConvTranspose2d::operator()(const Var& x) const {
  const int k = weight.dim(2);
  const int oh = (x.dim(2) - 1) * stride - 2 * pad + k;
  const int ow = (x.dim(3) - 1) * stride - 2 * pad + k;
  return ops::conv_transpose2d(x, weight, bias, stride, pad, oh, ow);
}

Linear Linear::create(ParameterStore& store, const std::string& prefix, int in, int out,
                      bool with_bias, std::mt19937_64& rng) {
  Linear fc;
  fc.weight = store.add(prefix + "/weight", he_normal({out, in}, in, rng));
  if (with_bias) fc.bias = store.add(prefix + "/bias", Tensor({out}), false);
  return fc;
}

BatchNorm BatchNorm::create(ParameterStore& store, const std::string& prefix, int channels) {
  BatchNorm bn;
  bn.gamma = store.add(prefix + "/gamma", Tensor({channels}, 1.0), false);
  bn.beta = store.add(prefix + "/beta", Tensor({channels}, 0.0), false);
  bn.stats = &store.add_stats(prefix, channels);
  return bn;
}

}  // namespace denet::nn
