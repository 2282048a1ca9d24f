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
#include <random>
#include <string>
#include <vector>

#include "denet/config.hpp"
#include "denet/core.hpp"
#include "denet/tensor.hpp"

namespace denet {

enum class Split { Train, Query, Gallery };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

/// Aligned images of one sample; images[m] is set iff missing.has(m).
struct SampleTriplet {
  std::array<std::optional<Tensor>, kNumModalities> images;  // (C, H, W) in [0, 1]
  int identity = 0;
  int camera = 0;
  int sequence = 0;
  Split split = Split::Train;
  MissingState missing = MissingState::complete();

  const Tensor& image(Modality m) const;
  bool operator==(const SampleTriplet& other) const;
};

struct DatasetIndex {
  int height = 0;
  int width = 0;
  std::array<int, kNumModalities> channels = {3, 1, 1};
  std::vector<SampleTriplet> samples;

  std::vector<int> indices_of(Split s) const;
  /// Modality-images present in query + gallery.
  int test_image_count() const;
};

struct SyntheticSpec {
  int n_train_ids = 16;
  int n_test_ids = 8;
  int samples_per_identity = 10;
  int n_cameras = 4;
  int queries_per_identity = 2;
  int height = 64;
  int width = 32;
  std::array<int, kNumModalities> channels = {3, 1, 1};
  int latent_dim = 6;
  double noise_sigma = 0.1;    // pixel noise
  double latent_jitter = 0.5;  // per-sample, per-modality latent perturbation
  std::uint64_t seed = 7;

  static SyntheticSpec from_config(const RunConfig& config);
  void validate() const;
};

/// Every identity owns a latent code; each modality is a fixed rendering of
/// that code (its own basis patterns and camera gains) plus per-sample
/// jitter, a small aligned shift and pixel noise. Pixels are quantized to
/// 8 bits so a written dataset reads back identically.
DatasetIndex generate_synthetic(const SyntheticSpec& spec);

/// <root>/<split>/<modality>/<identity>_<camera>_<seq>.png plus
/// <root>/manifest.txt.
void write_dataset(const DatasetIndex& index, const std::string& root);
DatasetIndex load_dataset(const std::string& root);

std::string sample_path(const SampleTriplet& s, Modality m);
inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kManifestMagic = "denet-manifest";
inline constexpr int kManifestVersion = 1;

/// Removes round(eta * N) modality-images uniformly at random from query and
/// gallery, N being the present test images, never emptying a sample.
/// Throws ConfigError naming the largest feasible eta when impossible.
DatasetIndex simulate_missing(const DatasetIndex& index, double eta, std::uint64_t seed);

/// Largest eta simulate_missing accepts for this index.
double max_feasible_missing_rate(const DatasetIndex& index);

/// Drops `modalities` from every test sample.
DatasetIndex fixed_missing(const DatasetIndex& index, MissingState modalities);

/// Batches of P identities x K samples drawn from the train split. Each call
/// to next_epoch() returns one epoch; every identity appears at least once.
class PkSampler {
 public:
  PkSampler(const DatasetIndex& index, int identities_per_batch, int instances, std::uint64_t seed);

  std::vector<std::vector<int>> next_epoch();
  int batch_size() const { return p_ * k_; }

 private:
  int p_, k_;
  std::vector<int> identities_;
  std::vector<std::vector<int>> by_identity_;
  std::mt19937_64 rng_;
};

}  // namespace denet
