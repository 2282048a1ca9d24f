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

#include "denet/cmft.hpp"

#include <cmath>

namespace denet {

CmftPair::CmftPair(nn::ParameterStore& store, const RunConfig& config, Modality source,
                   Modality target, std::mt19937_64& rng)
    : source_(source), target_(target) {
  if (source == target) throw InvariantError("transformation source equals target");
  const auto& widths = config.widths;
  const int blocks = static_cast<int>(widths.size());
  const int image_channels = config.image_channels(target);

  // Up-sample: widths reversed, each stage doubles H and W.
  int in = widths.back();
  for (int i = 0; i < blocks; ++i) {
    const bool last = i + 1 == blocks;
    const int out = last ? image_channels : widths[static_cast<std::size_t>(blocks - 2 - i)];
    const std::string name = prefix() + "/up" + std::to_string(i);
    up_.push_back(nn::ConvTranspose2d::create(store, name + "/deconv", in, out, 4, 2, 1, last, rng));
    if (!last) up_bn_.push_back(nn::BatchNorm::create(store, name + "/bn", out));
    in = out;
  }

  // Down-sample mirrors the encoder's shape schedule.
  in = image_channels;
  for (int i = 0; i < blocks; ++i) {
    const std::string name = prefix() + "/down" + std::to_string(i);
    ConvBlock b;
    b.conv = nn::Conv2d::create(store, name + "/conv", in, widths[static_cast<std::size_t>(i)], 3, 2, 1, false, rng);
    b.bn = nn::BatchNorm::create(store, name + "/bn", widths[static_cast<std::size_t>(i)]);
    down_.push_back(b);
    in = widths[static_cast<std::size_t>(i)];
  }
}

std::string CmftPair::prefix() const {
  return "cmft/" + std::string(to_string(source_)) + "->" + std::string(to_string(target_));
}

CmftOutput CmftPair::transform(const FeatureMap& f_src, bool training) const {
  if (f_src.modality != source_)
    throw UsageError(prefix() + " received a " + std::string(to_string(f_src.modality)) +
                     " feature");
  calls_->fetch_add(1);
  ag::Var x = f_src.data;
  for (std::size_t i = 0; i < up_.size(); ++i) {
    x = up_[i](x);
    if (i < up_bn_.size()) x = ops::relu(up_bn_[i](x, training));
  }
  // tanh mapped onto the [0, 1] image range.
  ag::Var fake = ops::scale(ops::add_scalar(ops::tanh(x), 1.0), 0.5);
  check_finite(fake.value(), "up-sample");
  ag::Var f = fake;
  for (const auto& block : down_) f = block(f, training);
  check_finite(f.value(), "down-sample");
  return CmftOutput{fake, FeatureMap{f, target_, Provenance::Recovered}};
}

ProjectionHead ProjectionHead::create(nn::ParameterStore& store, const std::string& prefix,
                                      int channels, int embed_dim, std::mt19937_64& rng) {
  ProjectionHead head;
  head.real_fc = nn::Linear::create(store, prefix + "/theta/fc", channels, embed_dim, false, rng);
  head.real_bn = nn::BatchNorm::create(store, prefix + "/theta/bn", embed_dim);
  head.recovered_fc = nn::Linear::create(store, prefix + "/theta_rec/fc", channels, embed_dim, false, rng);
  head.recovered_bn = nn::BatchNorm::create(store, prefix + "/theta_rec/bn", embed_dim);
  return head;
}

ag::Var ProjectionHead::project_real(const ag::Var& pooled, bool training) const {
  return ops::relu(real_bn(real_fc(pooled), training));
}

ag::Var ProjectionHead::project_recovered(const ag::Var& pooled, bool training) const {
  return ops::relu(recovered_bn(recovered_fc(pooled), training));
}

ag::Var reconstruction_loss(const ag::Var& fake, const ag::Var& real, RecReduction reduction) {
  if (fake.shape() != real.shape())
    throw UsageError("reconstruction_loss: shape mismatch " + shape_string(fake.shape()) + " vs " +
                     shape_string(real.shape()));
  const Tensor& a = fake.value();
  const Tensor& b = real.value();
  const double denom = reduction == RecReduction::Mean ? static_cast<double>(a.size())
                                                       : static_cast<double>(a.dim(0));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (b[i] - a[i]) * (b[i] - a[i]);
  return ag::make_result(Tensor({1}, acc / denom), {fake, real}, [a, b, denom](ag::Node& self) {
    const double g = self.grad[0];
    Tensor ga(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) ga[i] = 2.0 * (a[i] - b[i]) / denom * g;
    if (self.parents[0] && self.parents[0]->requires_grad) self.parents[0]->add_grad(ga);
    if (self.parents[1] && self.parents[1]->requires_grad) {
      for (auto& v : ga.values()) v = -v;
      self.parents[1]->add_grad(ga);
    }
  });
}

namespace {

// Batch mean of per-row L1 distances between two (N, E) tensors.
ag::Var mean_row_l1(const ag::Var& x, const ag::Var& y) {
  if (x.shape() != y.shape()) throw UsageError("similarity_loss: embedding shapes differ");
  const Tensor& a = x.value();
  const Tensor& b = y.value();
  const double n = static_cast<double>(a.dim(0));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return ag::make_result(Tensor({1}, acc / n), {x, y}, [a, b, n](ag::Node& self) {
    const double g = self.grad[0];
    Tensor ga(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      ga[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * g / n;
    }
    if (self.parents[0] && self.parents[0]->requires_grad) self.parents[0]->add_grad(ga);
    if (self.parents[1] && self.parents[1]->requires_grad) {
      for (auto& v : ga.values()) v = -v;
      self.parents[1]->add_grad(ga);
    }
  });
}

}  // namespace

ag::Var similarity_loss(const ProjectionHead& head, const FeatureMap& f_real,
                        const FeatureMap& f_rec, bool training) {
  if (f_real.data.shape() != f_rec.data.shape())
    throw UsageError("similarity_loss: feature shapes differ");
  auto real = head.project_real(global_average_pool(f_real), training);
  auto rec = head.project_recovered(global_average_pool(f_rec), training);
  return mean_row_l1(real, rec);
}

CmftBank::CmftBank(nn::ParameterStore& store, const RunConfig& config, std::mt19937_64& rng) {
  for (Modality s : kAllModalities)
    for (Modality t : kAllModalities)
      if (s != t) pairs_.emplace_back(store, config, s, t, rng);
  for (Modality t : kAllModalities)
    heads_.push_back(ProjectionHead::create(store, "cmft/head/" + std::string(to_string(t)),
                                            config.feature_channels(), config.embed_dim, rng));
}

const CmftPair& CmftBank::pair(Modality source, Modality target) const {
  for (const auto& p : pairs_)
    if (p.source() == source && p.target() == target) return p;
  throw UsageError("no transformation from a modality to itself");
}

long CmftBank::total_calls() const {
  long n = 0;
  for (const auto& p : pairs_) n += p.calls();
  return n;
}

void CmftBank::reset_calls() const {
  for (const auto& p : pairs_) p.reset_calls();
}

ModalityFeatures recover_missing(MissingState state, const ModalityFeatures& features,
                                 const CmftBank& bank, const std::vector<Modality>& priority,
                                 bool training) {
  if (!validate_state(state)) throw InvariantError("recover_missing: empty missing state");
  for (Modality m : kAllModalities) {
    if (features[static_cast<std::size_t>(index_of(m))].has_value() != state.has(m))
      throw InvariantError("recover_missing: features do not match the missing state");
  }
  Modality source = priority.front();
  for (Modality m : priority) {
    if (state.has(m)) {
      source = m;
      break;
    }
  }
  ModalityFeatures out = features;
  for (Modality m : state.missing()) {
    const auto& src = *features[static_cast<std::size_t>(index_of(source))];
    out[static_cast<std::size_t>(index_of(m))] = bank.pair(source, m).transform(src, training).recovered;
  }
  return out;
}

}  // namespace denet
