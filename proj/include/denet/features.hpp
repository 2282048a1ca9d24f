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

#include <array>
#include <optional>

#include "denet/autograd.hpp"
#include "denet/core.hpp"

namespace denet {

enum class Provenance { Extracted, Recovered };

/// Batched (N, C, H, W) feature of one modality.
struct FeatureMap {
  ag::Var data;
  Modality modality = Modality::RGB;
  Provenance provenance = Provenance::Extracted;
};

/// One optional feature per modality, indexed by `index_of(Modality)`.
using ModalityFeatures = std::array<std::optional<FeatureMap>, kNumModalities>;

/// Throws InvariantError naming `stage` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const char* stage);

}  // namespace denet
