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

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "denet/checkpoint.hpp"
#include "denet/data.hpp"
#include "denet/evalkit.hpp"
#include "denet/model.hpp"

namespace denet {

/// Raised when a loss turns NaN or infinite; the last checkpoint written by
/// fit() is left in place.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SGD with momentum and L2 weight decay:
///   g = grad + wd * p;  buf = momentum * buf + g;  p -= lr * buf
/// Parameters without a gradient or marked frozen are left untouched.
void sgd_step(nn::ParameterStore& store, double lr, double momentum, double weight_decay);

/// Step decay: lr * gamma^(number of milestones <= epoch).
double learning_rate_at(const RunConfig& config, int epoch);

struct TrainBatch {
  std::array<Tensor, kNumModalities> images;  // (N, c_m, H, W)
  std::vector<int> labels;                    // class indices
};

TrainBatch make_batch(const DatasetIndex& index, const std::vector<int>& sample_ids,
                      const std::vector<int>& class_of_identity);

/// Dense class indices for the train identities (ascending identity id).
std::vector<int> class_map(const DatasetIndex& index, int* num_classes);

struct EpochSummary {
  int epoch = 0;
  double lr = 0.0;
  int steps = 0;
  LossReport mean;
};

class Trainer {
 public:
  Trainer(const RunConfig& config, int num_classes);
  /// Takes over an existing model (for example one restored from disk).
  explicit Trainer(std::unique_ptr<DenetModel> model);

  DenetModel& model() { return *model_; }
  const DenetModel& model() const { return *model_; }
  int epoch() const { return epoch_; }

  /// One optimization step at the current learning rate and phase.
  LossReport train_step(const TrainBatch& batch);
  /// Forward pass only, in training mode, without touching parameters.
  LossReport compute_losses(const TrainBatch& batch);

  /// Runs the configured number of epochs on the train split. When set,
  /// `log_path` receives one JSON object per step and per epoch, and
  /// `checkpoint_path` is rewritten after every epoch.
  std::vector<EpochSummary> fit(const DatasetIndex& index, const std::string& log_path = "",
                                const std::string& checkpoint_path = "");

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

  /// Staged schedule: phase 0 trains encoders, graph and heads; phase 1
  /// trains the transformations only.
  void set_phase(int phase);
  int phase() const { return phase_; }

  std::string rng_state() const;

 private:
  LossReport forward(const TrainBatch& batch, bool apply);

  std::unique_ptr<DenetModel> model_;
  std::mt19937_64 dropout_rng_;
  double lr_;
  int epoch_ = 0;
  int phase_ = -1;  // -1: joint
  long step_ = 0;
};

struct ScenarioSpec {
  std::string name;
  std::optional<MissingState> dropped;  // fixed scenario
  std::optional<double> eta;            // random scenario
};

/// no_missing, missing_NIR, missing_TIR, missing_NIR+TIR.
std::vector<ScenarioSpec> fixed_scenarios();
ScenarioSpec eta_scenario(double eta);

/// Applies the scenario to the test split. Random scenarios whose eta is not
/// feasible run at the largest feasible eta; `effective_eta` reports it.
DatasetIndex apply_scenario(const DatasetIndex& index, const ScenarioSpec& scenario,
                            std::uint64_t seed, double* effective_eta);

MetricsReport evaluate_model(const DenetModel& model, const DatasetIndex& index, const std::string& scenario,
                             int max_rank);

/// Writes <dir>/<name>.json, <dir>/<name>_cmc.csv.
void write_report(const MetricsReport& report, const std::string& dir);

DatasetIndex dataset_for(const RunConfig& config);

struct ExperimentResult {
  std::string checkpoint_path;
  std::string checkpoint_hash;
  std::vector<EpochSummary> epochs;
  std::vector<MetricsReport> reports;

  const MetricsReport& report(const std::string& scenario) const;
};

/// Train once, save the checkpoint, then evaluate the fixed scenarios and
/// the eta sweep on freshly loaded copies of it. Outputs go under `out_dir`
/// (train_log.jsonl, checkpoint.bin, config.txt, metrics/).
ExperimentResult run_experiment(const RunConfig& config, const std::string& out_dir,
                                const std::optional<DatasetIndex>& dataset = std::nullopt);

/// Evaluates the reports for `scenarios` (and the eta curve when `etas` is
/// non-empty) against a saved checkpoint.
std::vector<MetricsReport> evaluate_checkpoint(const std::string& checkpoint_path,
                                               const DatasetIndex& index,
                                               const std::vector<ScenarioSpec>& scenarios,
                                               std::optional<EnhancementMode> mode = std::nullopt);

/// "eta,requested_eta,mAP,rank1" rows.
void write_eta_curve(const std::vector<MetricsReport>& reports, const std::string& path);

}  // namespace denet
