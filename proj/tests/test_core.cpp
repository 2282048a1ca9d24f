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

#include <set>

#include "denet/config.hpp"
#include "denet/core.hpp"

using namespace denet;

TEST(MissingState, EnumeratesSevenValidStates) {
  const auto states = enumerate_missing_states();
  ASSERT_EQ(states.size(), 7u);
  EXPECT_TRUE(states.front().is_complete());
  std::set<int> masks;
  for (auto s : states) {
    EXPECT_TRUE(validate_state(s));
    masks.insert(s.mask());
  }
  EXPECT_EQ(masks.size(), 7u);
  EXPECT_FALSE(validate_state(MissingState::of({})));
}

TEST(MissingState, SetOperations) {
  auto s = MissingState::complete().without(Modality::NIR);
  EXPECT_TRUE(s.has(Modality::RGB));
  EXPECT_FALSE(s.has(Modality::NIR));
  EXPECT_EQ(s.count(), 2);
  EXPECT_EQ(s.missing_count(), 1);
  EXPECT_EQ(s.label(), "RGB+TIR");
  EXPECT_EQ(s.with(Modality::NIR), MissingState::complete());
  EXPECT_EQ(MissingState::of({}).label(), "none");
  ASSERT_EQ(s.missing().size(), 1u);
  EXPECT_EQ(s.missing()[0], Modality::NIR);
}

TEST(MissingState, ParsesModalitySets) {
  EXPECT_EQ(parse_modality_set("NIR,TIR"), MissingState::of({Modality::NIR, Modality::TIR}));
  EXPECT_EQ(parse_modality_set("rgb+tir"), MissingState::of({Modality::RGB, Modality::TIR}));
  EXPECT_THROW(parse_modality_set("depth"), UsageError);
  EXPECT_EQ(parse_modality("TIR"), Modality::TIR);
}

TEST(Config, DefaultsValidateAndDeriveDimensions) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.feature_channels(), 256);
  EXPECT_EQ(c.final_dim(), 6 * 256);
  EXPECT_EQ(c.feature_height(), 4);
  EXPECT_EQ(c.feature_width(), 2);
  EXPECT_EQ(c.identities_per_batch(), 4);
}

TEST(Config, RoundTripsThroughText) {
  RunConfig c;
  c.set("widths", "8,16");
  c.set("enhancement_mode", "single-direction");
  c.set("rho", "0.5");
  c.set("use_sim", "false");
  c.set("eta_sweep", "0,0.5");
  c.set("recovery_priority", "NIR,RGB,TIR");
  const auto text = c.serialize();
  const auto back = RunConfig::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.widths, (std::vector<int>{8, 16}));
  EXPECT_EQ(back.enhancement_mode, EnhancementMode::SingleDirection);
  EXPECT_DOUBLE_EQ(back.rho, 0.5);
  EXPECT_FALSE(back.use_sim);
  EXPECT_EQ(back.recovery_priority.front(), Modality::NIR);
}

TEST(Config, UnknownKeyAndBadValuesAreErrors) {
  RunConfig c;
  EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
  EXPECT_THROW(RunConfig::parse("epochs = 3\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(c.set("epochs", "three"), ConfigError);
  EXPECT_THROW(c.set("enhancement_mode", "sideways"), ConfigError);
}

TEST(Config, ValidationRejectsInconsistentValues) {
  RunConfig c;
  c.batch_size = 7;  // not a multiple of instances_per_id
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.image_height = 60;  // not divisible by 2^blocks
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.missing_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ParsesCommentsAndOverrides) {
  auto c = RunConfig::parse("# tiny\nepochs = 3   # short\n\nlr = 0.5\n");
  EXPECT_EQ(c.epochs, 3);
  EXPECT_DOUBLE_EQ(c.lr, 0.5);
  auto [k, v] = split_override("margin=0.4");
  EXPECT_EQ(k, "margin");
  EXPECT_EQ(v, "0.4");
  EXPECT_THROW(split_override("margin"), UsageError);
}

TEST(Config, EveryKeyIsDocumentedAndReadable) {
  RunConfig c;
  for (const auto& [key, doc] : RunConfig::describe()) {
    EXPECT_FALSE(doc.empty()) << key;
    EXPECT_NO_THROW(c.set(key, c.get(key))) << key;
  }
}
