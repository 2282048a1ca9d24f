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

#include "denet/cmft.hpp"
#include "denet/encoder.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace denet;
using ag::Var;

namespace {

struct CmftTest : ::testing::Test {
  RunConfig config = testing_support::tiny_config();
  nn::ParameterStore store;
  std::mt19937_64 rng{2};

  FeatureMap feature(Modality m, int n = 2) {
    return FeatureMap{Var(oracle::random_tensor({n, 8, 2, 1}, rng), true), m, Provenance::Extracted};
  }
};

}  // namespace

TEST_F(CmftTest, TransformShapes) {
  CmftBank bank(store, config, rng);
  EXPECT_EQ(bank.pairs().size(), 6u);
  auto out = bank.pair(Modality::RGB, Modality::NIR).transform(feature(Modality::RGB), true);
  EXPECT_EQ(out.fake_image.shape(), (Shape{2, 1, 8, 4}));
  EXPECT_EQ(out.recovered.data.shape(), (Shape{2, 8, 2, 1}));
  EXPECT_EQ(out.recovered.modality, Modality::NIR);
  EXPECT_EQ(out.recovered.provenance, Provenance::Recovered);
  for (double v : out.fake_image.value().values()) EXPECT_TRUE(v >= 0 && v <= 1);
  auto to_rgb = bank.pair(Modality::TIR, Modality::RGB).transform(feature(Modality::TIR), false);
  EXPECT_EQ(to_rgb.fake_image.dim(1), 3);
  EXPECT_THROW(bank.pair(Modality::RGB, Modality::NIR).transform(feature(Modality::TIR), true), UsageError);
  EXPECT_THROW(bank.pair(Modality::RGB, Modality::RGB), UsageError);
}

TEST_F(CmftTest, ReconstructionLossValues) {
  Var a(oracle::random_tensor({2, 1, 4, 2}, rng));
  EXPECT_EQ(reconstruction_loss(a, a, RecReduction::Mean).value()[0], 0.0);
  Tensor zeros({2, 1, 4, 2}), ones({2, 1, 4, 2});
  ones.fill(0.5);
  EXPECT_NEAR(reconstruction_loss(Var(ones), Var(zeros), RecReduction::Mean).value()[0], 0.25, 1e-12);
  // Sum: per-sample sum of 8 squared errors, averaged over the batch.
  EXPECT_NEAR(reconstruction_loss(Var(ones), Var(zeros), RecReduction::Sum).value()[0], 2.0, 1e-12);
  for (int t = 0; t < 10; ++t) {
    Var x(oracle::random_tensor({2, 1, 4, 2}, rng)), y(oracle::random_tensor({2, 1, 4, 2}, rng));
    EXPECT_GT(reconstruction_loss(x, y, RecReduction::Mean).value()[0], 0.0);
  }
}

TEST_F(CmftTest, SimilarityLossZeroWhenHeadsAndInputsMatch) {
  auto head = ProjectionHead::create(store, "head", 8, 6, rng);
  auto f = feature(Modality::NIR, 4);
  EXPECT_GT(similarity_loss(head, f, f, true).value()[0], 0.0);  // separate parameters differ
  head.recovered_fc.weight.mutable_value() = head.real_fc.weight.value();
  head.recovered_fc.bias.mutable_value() = head.real_fc.bias.value();
  FeatureMap rec{f.data, Modality::NIR, Provenance::Recovered};
  EXPECT_EQ(similarity_loss(head, f, rec, true).value()[0], 0.0);
  EXPECT_NE(head.real_fc.weight.node(), head.recovered_fc.weight.node());
}

TEST_F(CmftTest, LossGradients) {
  Var fake(oracle::random_tensor({2, 1, 4, 2}, rng), true);
  Var real(oracle::random_tensor({2, 1, 4, 2}, rng));
  for (auto red : {RecReduction::Mean, RecReduction::Sum})
    EXPECT_LT(oracle::gradient_check([&] { return reconstruction_loss(fake, real, red); }, {fake}), 1e-3);

  auto head = ProjectionHead::create(store, "head", 8, 6, rng);
  auto fr = feature(Modality::TIR, 4), fc = feature(Modality::TIR, 4);
  fc.provenance = Provenance::Recovered;
  std::vector<Var> inputs = {fr.data, fc.data, head.real_fc.weight, head.recovered_fc.weight};
  EXPECT_LT(oracle::gradient_check([&] { return similarity_loss(head, fr, fc, true); }, inputs), 1e-3);
}

TEST_F(CmftTest, TransformGradientReachesPairParametersOnly) {
  CmftBank bank(store, config, rng);
  const auto& pair = bank.pair(Modality::NIR, Modality::TIR);
  auto out = pair.transform(feature(Modality::NIR), true);
  ag::backward(ops::add(ops::mean(out.fake_image), ops::mean(out.recovered.data)));
  for (const auto& p : store.parameters()) {
    const bool own = p.name.rfind(pair.prefix() + "/", 0) == 0;
    if (!own) {
      EXPECT_FALSE(p.var.has_grad()) << p.name;
    }
  }
  EXPECT_EQ(pair.prefix(), "cmft/NIR->TIR");
}

TEST_F(CmftTest, RecoverMissingUsesPriorityAndCountsCalls) {
  CmftBank bank(store, config, rng);
  ModalityFeatures features;
  features[1] = feature(Modality::NIR);
  features[2] = feature(Modality::TIR);
  const auto state = MissingState::of({Modality::NIR, Modality::TIR});
  bank.reset_calls();
  auto out = recover_missing(state, features, bank, {Modality::RGB, Modality::TIR, Modality::NIR});
  EXPECT_EQ(bank.total_calls(), 1);
  EXPECT_EQ(bank.pair(Modality::TIR, Modality::RGB).calls(), 1);
  EXPECT_EQ(out[0]->provenance, Provenance::Recovered);
  EXPECT_EQ(out[1]->data.node(), features[1]->data.node());  // untouched
  EXPECT_EQ(out[2]->data.node(), features[2]->data.node());

  bank.reset_calls();
  auto complete = recover_missing(MissingState::complete(),
                                  {feature(Modality::RGB), feature(Modality::NIR), feature(Modality::TIR)}, bank,
                                  config.recovery_priority);
  EXPECT_EQ(bank.total_calls(), 0);

  ModalityFeatures rgb_only;
  rgb_only[0] = feature(Modality::RGB);
  bank.reset_calls();
  auto filled = recover_missing(MissingState::of({Modality::RGB}), rgb_only, bank, config.recovery_priority);
  EXPECT_EQ(bank.pair(Modality::RGB, Modality::NIR).calls(), 1);
  EXPECT_EQ(bank.pair(Modality::RGB, Modality::TIR).calls(), 1);
  for (const auto& f : filled) EXPECT_TRUE(f.has_value());
}
