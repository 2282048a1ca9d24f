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

#include "denet/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

namespace denet {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::RGB:
      return "RGB";
    case Modality::NIR:
      return "NIR";
    case Modality::TIR:
      return "TIR";
  }
  return "?";
}

Modality parse_modality(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (Modality m : kAllModalities) {
    if (upper == to_string(m)) return m;
  }
  throw UsageError("unknown modality '" + std::string(text) + "'");
}

MissingState MissingState::of(std::initializer_list<Modality> modalities) {
  MissingState s;
  for (Modality m : modalities) s = s.with(m);
  return s;
}

int MissingState::count() const { return std::popcount(mask_); }

MissingState MissingState::with(Modality m) const {
  return MissingState(static_cast<std::uint8_t>(mask_ | (1U << index_of(m))));
}

MissingState MissingState::without(Modality m) const {
  return MissingState(static_cast<std::uint8_t>(mask_ & ~(1U << index_of(m))));
}

std::vector<Modality> MissingState::available() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities)
    if (has(m)) out.push_back(m);
  return out;
}

std::vector<Modality> MissingState::missing() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities)
    if (!has(m)) out.push_back(m);
  return out;
}

std::string MissingState::label() const {
  if (empty()) return "none";
  std::string out;
  for (Modality m : available()) {
    if (!out.empty()) out += '+';
    out += to_string(m);
  }
  return out;
}

std::vector<MissingState> enumerate_missing_states() {
  std::vector<MissingState> states;
  for (int present = kNumModalities; present >= 1; --present) {
    // Lexicographic over modality order within each size class.
    std::vector<std::uint8_t> masks;
    for (std::uint8_t mask = 1; mask < 8; ++mask)
      if (std::popcount(mask) == present) masks.push_back(mask);
    std::sort(masks.begin(), masks.end(), [](std::uint8_t a, std::uint8_t b) {
      // Lower set bits first: {RGB,NIR} before {RGB,TIR} before {NIR,TIR}.
      for (int bit = 0; bit < kNumModalities; ++bit) {
        bool ha = (a >> bit) & 1U, hb = (b >> bit) & 1U;
        if (ha != hb) return ha;
      }
      return false;
    });
    for (auto mask : masks) states.push_back(MissingState::from_mask(mask));
  }
  return states;
}

bool validate_state(MissingState s) { return !s.empty(); }

MissingState parse_modality_set(std::string_view text) {
  MissingState s;
  std::string token;
  auto flush = [&] {
    auto b = token.find_first_not_of(" \t");
    if (b != std::string::npos) {
      auto e = token.find_last_not_of(" \t");
      s = s.with(parse_modality(std::string_view(token).substr(b, e - b + 1)));
    }
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '+') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  return s;
}

}  // namespace denet
