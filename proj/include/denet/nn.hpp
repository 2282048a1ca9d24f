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

#include <deque>
#include <random>
#include <string>
#include <vector>

#include "denet/ops.hpp"

namespace denet::nn {

using ag::Var;

struct Parameter {
  std::string name;
  Var var;
  Tensor momentum;
  bool frozen = false;
  bool decay = true;  // weight decay applies (off for BN affine and biases)
};

/// Owns every trainable tensor and running statistic of a model under a
/// hierarchical name ("encoder/RGB/block0/conv/weight").
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Var add(const std::string& name, Tensor init, bool decay = true);
  ops::BatchNormStats& add_stats(const std::string& name, int channels);

  std::deque<Parameter>& parameters() { return params_; }
  const std::deque<Parameter>& parameters() const { return params_; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  /// Every persistent tensor (parameters, then running statistics) by name.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  void zero_grad();
  void set_frozen(const std::string& prefix, bool frozen);
  std::size_t parameter_count() const;

 private:
  std::deque<Parameter> params_;
  std::deque<std::pair<std::string, ops::BatchNormStats>> stats_;
};

/// He-normal initializer used for conv and linear weights.
Tensor he_normal(Shape shape, int fan_in, std::mt19937_64& rng);

struct Conv2d {
  Var weight;
  Var bias;  // may be undefined
  int stride = 1;
  int pad = 0;

  static Conv2d create(ParameterStore& store, const std::string& prefix, int in, int out, int kernel,
                       int stride, int pad, bool with_bias, std::mt19937_64& rng);
  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
  int out_channels() const { return weight.dim(0); }
};

struct ConvTranspose2d {
  Var weight;  // (in, out, k, k)
  Var bias;
  int stride = 2;
  int pad = 1;

  static ConvTranspose2d create(ParameterStore& store, const std::string& prefix, int in, int out,
                                int kernel, int stride, int pad, bool with_bias,
                                std::mt19937_64& rng);
  /// Output size follows (in - 1) * stride - 2 * pad + kernel.
  Var operator()(const Var& x) const;
};

struct Linear {
  Var weight;  // (out, in)
  Var bias;

  static Linear create(ParameterStore& store, const std::string& prefix, int in, int out,
                       bool with_bias, std::mt19937_64& rng);
  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
};

struct BatchNorm {
  Var gamma;
  Var beta;
  ops::BatchNormStats* stats = nullptr;

  static BatchNorm create(ParameterStore& store, const std::string& prefix, int channels);
  Var operator()(const Var& x, bool training) const {
    return ops::batch_norm(x, gamma, beta, *stats, training);
  }
};

}  // namespace denet::nn
