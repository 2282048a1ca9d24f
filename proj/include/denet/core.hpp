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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace denet {

// Error hierarchy. The CLI maps these onto distinct exit codes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Sensor modality. Declaration order is the iteration order everywhere.
enum class Modality : std::uint8_t { RGB = 0, NIR = 1, TIR = 2 };

inline constexpr int kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {
    Modality::RGB, Modality::NIR, Modality::TIR};

constexpr int index_of(Modality m) { return static_cast<int>(m); }

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

/// Set of modalities present in a sample, stored as a 3-bit mask.
/// A default-constructed state is empty and therefore invalid.
class MissingState {
 public:
  constexpr MissingState() = default;
  static constexpr MissingState complete() { return MissingState(0b111); }
  static constexpr MissingState from_mask(std::uint8_t mask) {
    return MissingState(static_cast<std::uint8_t>(mask & 0b111));
  }
  static MissingState of(std::initializer_list<Modality> modalities);

  constexpr bool has(Modality m) const { return (mask_ >> index_of(m)) & 1U; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr bool is_complete() const { return mask_ == 0b111; }
  constexpr std::uint8_t mask() const { return mask_; }
  int count() const;
  int missing_count() const { return kNumModalities - count(); }

  MissingState with(Modality m) const;
  MissingState without(Modality m) const;
  std::vector<Modality> available() const;
  std::vector<Modality> missing() const;

  /// "RGB+NIR" style label; "none" for the empty state.
  std::string label() const;

  friend constexpr bool operator==(MissingState, MissingState) = default;

 private:
  constexpr explicit MissingState(std::uint8_t mask) : mask_(mask) {}
  std::uint8_t mask_ = 0;
};

/// All 7 non-empty states: complete first, then pairs, then singletons,
/// each group in modality order.
std::vector<MissingState> enumerate_missing_states();

bool validate_state(MissingState s);

/// Parses "RGB,NIR" (comma or plus separated). Empty text yields the empty set.
MissingState parse_modality_set(std::string_view text);

}  // namespace denet
