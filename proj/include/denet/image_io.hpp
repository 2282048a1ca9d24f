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

#include <string>

#include "denet/tensor.hpp"

namespace denet {

/// Writes a (C, H, W) tensor with values in [0, 1] as an 8-bit PNG (C = 1 or 3).
void write_png(const std::string& path, const Tensor& image);

/// Reads an 8-bit gray or RGB PNG into a (C, H, W) tensor in [0, 1].
Tensor read_png(const std::string& path);

/// Rounds every value to the nearest multiple of 1/255 after clamping to [0, 1].
void quantize_to_u8(Tensor& image);

}  // namespace denet
