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

#include "denet/encoder.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace denet;
using ag::Var;

namespace {

struct Fixture : ::testing::Test {
  RunConfig config = testing_support::tiny_config();
  nn::ParameterStore store;
  std::mt19937_64 rng{1};
};

}  // namespace

TEST_F(Fixture, ExtractShapeAndProvenance) {
  BranchEncoder rgb(store, config, Modality::RGB, rng);
  BranchEncoder nir(store, config, Modality::NIR, rng);
  auto f = rgb.extract(Var(oracle::random_tensor({2, 3, 8, 4}, rng)), true);
  EXPECT_EQ(f.data.shape(), (Shape{2, 8, 2, 1}));
  EXPECT_EQ(f.modality, Modality::RGB);
  EXPECT_EQ(f.provenance, Provenance::Extracted);
  // Single-channel modality images are replicated to the input width.
  auto g = nir.extract(Var(oracle::random_tensor({2, 1, 8, 4}, rng)), true);
  EXPECT_EQ(g.data.shape(), (Shape{2, 8, 2, 1}));
  EXPECT_THROW(nir.extract(Var(oracle::random_tensor({2, 3, 8, 4}, rng)), true), ConfigError);
  EXPECT_THROW(rgb.extract(Var(oracle::random_tensor({2, 3, 6, 4}, rng)), true), ConfigError);
}

TEST_F(Fixture, BranchesAreIndependent) {
  std::vector<BranchEncoder> branches;
  for (Modality m : kAllModalities) branches.emplace_back(store, config, m, rng);
  auto f = branches[0].extract(Var(oracle::random_tensor({2, 3, 8, 4}, rng)), true);
  ag::backward(ops::sum(global_average_pool(f)));
  int touched = 0;
  for (const auto& p : store.parameters()) {
    const bool rgb = p.name.rfind("encoder/RGB/", 0) == 0;
    if (!rgb) {
      EXPECT_FALSE(p.var.has_grad()) << p.name;
    }
    if (rgb && p.var.has_grad()) ++touched;
  }
  EXPECT_GT(touched, 0);
  // Separate parameter sets with identical layouts.
  EXPECT_NE(store.find("encoder/RGB/block0/conv/weight"), nullptr);
  EXPECT_NE(store.find("encoder/TIR/block0/conv/weight"), nullptr);
  EXPECT_NE(store.find("encoder/RGB/block0/conv/weight")->var.node(),
            store.find("encoder/NIR/block0/conv/weight")->var.node());
}

TEST_F(Fixture, AttentionGatesAreBounded) {
  auto block = AttentionBlock::create(store, "att", 6, 2, 3, rng);
  Var f(oracle::random_tensor({2, 6, 4, 3}, rng, 2.0));
  auto cg = block.channel_gate(f);
  auto sg = block.spatial_gate(f);
  EXPECT_EQ(cg.shape(), (Shape{2, 6, 1, 1}));
  EXPECT_EQ(sg.shape(), (Shape{2, 1, 4, 3}));
  for (double v : cg.value().values()) EXPECT_TRUE(v > 0 && v < 1);
  for (double v : sg.value().values()) EXPECT_TRUE(v > 0 && v < 1);
  auto out = apply_attention(block, f);
  EXPECT_EQ(out.shape(), f.shape());

  // out = (f * cg) * spatial_gate(f * cg)
  Var refined = ops::mul(f, cg);
  auto expected = ops::mul(refined, block.spatial_gate(refined));
  EXPECT_LT(max_abs_diff(out.value(), expected.value()), 1e-12);
}

TEST_F(Fixture, AttentionGradient) {
  auto block = AttentionBlock::create(store, "att", 4, 2, 3, rng);
  Var f(oracle::random_tensor({2, 4, 3, 2}, rng), true);
  Var w(oracle::random_tensor({2, 4, 3, 2}, rng));
  std::vector<Var> inputs = {f, block.squeeze.weight, block.spatial.weight};
  EXPECT_LT(oracle::gradient_check([&] { return ops::sum(ops::mul(block(f), w)); }, inputs), 1e-3);
}

TEST_F(Fixture, EveryBlockPlacementAddsAttentionPerBlock) {
  config.attention_placement = AttentionPlacement::EveryBlock;
  BranchEncoder enc(store, config, Modality::TIR, rng);
  EXPECT_EQ(enc.attention().size(), config.widths.size());
  auto f = enc.extract(Var(oracle::random_tensor({2, 1, 8, 4}, rng)), false);
  EXPECT_EQ(f.data.dim(1), 8);
}

TEST(CheckFinite, RejectsNaN) {
  Tensor t({2}, {1.0, std::nan("")});
  EXPECT_THROW(check_finite(t, "test"), InvariantError);
}
