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

#include <memory>
#include <string>

#include "denet/model.hpp"

namespace denet {

// Binary layout, little-endian:
//   "DENETCKP" | u32 version | str config | u32 num_classes | str rng_state
//   | u64 tensor count | { str name | u32 rank | i32 dims[rank] | f64 values }
// where str is u32 length + bytes.
inline constexpr char kCheckpointMagic[] = "DENETCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const DenetModel& model, const std::string& rng_state, const std::string& path);

struct LoadedCheckpoint {
  std::unique_ptr<DenetModel> model;
  std::string rng_state;
  std::string sha256;
};

/// Rebuilds the model from the embedded config and restores every tensor.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

}  // namespace denet
