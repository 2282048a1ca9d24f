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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "denet/core.hpp"

namespace denet {

enum class EnhancementMode { Dynamic, Fixed, SingleDirection, None };
enum class RecReduction { Mean, Sum };
enum class AttentionPlacement { Final, EveryBlock };
enum class TrainingSchedule { Joint, Staged };

std::string_view to_string(EnhancementMode mode);
EnhancementMode parse_enhancement_mode(std::string_view text);

/// Every tunable of a run. Serialized as a flat `key = value` file; see
/// `RunConfig::describe()` for the documented key list.
struct RunConfig {
  // Backbone.
  std::vector<int> widths = {32, 64, 128, 256};
  int in_channels = 3;
  int image_height = 64;
  int image_width = 32;
  int nir_channels = 1;
  int tir_channels = 1;
  AttentionPlacement attention_placement = AttentionPlacement::Final;
  int attention_reduction = 8;
  int spatial_kernel = 7;

  // Cross-modality transformation.
  int embed_dim = 64;
  RecReduction rec_reduction = RecReduction::Mean;
  bool cmft_detach_source = true;
  std::vector<Modality> recovery_priority = {Modality::RGB, Modality::NIR, Modality::TIR};

  // Enhancement graph.
  EnhancementMode enhancement_mode = EnhancementMode::Dynamic;
  int dem_reduction = 2;
  bool dem_softmax = false;

  // Objective.
  double margin = 0.3;
  double smoothing = 0.1;
  double rho = 1.0;
  double mu = 1.0;
  bool use_rec = true;
  bool use_sim = true;
  bool reid_on_recovered = true;
  bool aux_branch_heads = false;
  double dropout = 0.5;

  // Optimization.
  double lr = 0.01;
  std::vector<int> lr_milestones = {10, 18};
  double lr_gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 20;
  int batch_size = 8;
  int instances_per_id = 2;
  TrainingSchedule schedule = TrainingSchedule::Joint;
  std::uint64_t seed = 1;

  // Data.
  std::string data_dir;
  int n_train_ids = 16;
  int n_test_ids = 8;
  int samples_per_id = 10;
  int n_cameras = 4;
  int queries_per_id = 2;
  double noise_sigma = 0.1;
  double latent_jitter = 0.5;
  std::uint64_t data_seed = 7;

  // Evaluation.
  double missing_rate = 0.25;
  std::uint64_t missing_seed = 11;
  std::vector<double> eta_sweep = {0.0, 0.25, 0.5, 0.75};
  int max_rank = 10;

  int feature_channels() const { return widths.back(); }
  int feature_height() const;
  int feature_width() const;
  int final_dim() const { return 6 * feature_channels(); }
  int image_channels(Modality m) const;
  int identities_per_batch() const { return batch_size / instances_per_id; }

  /// Throws ConfigError when an invariant on the values does not hold.
  void validate() const;

  /// Applies one `key=value` assignment; unknown keys throw ConfigError.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  /// (key, documentation) for every accepted key, in file order.
  static const std::vector<std::pair<std::string, std::string>>& describe();
};

/// Parses "a=1" into {"a","1"}; throws UsageError when '=' is absent.
std::pair<std::string, std::string> split_override(std::string_view text);

}  // namespace denet
