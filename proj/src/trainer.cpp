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

#include "denet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace denet {

namespace fs = std::filesystem;

void sgd_step(nn::ParameterStore& store, double lr, double momentum, double weight_decay) {
  for (auto& p : store.parameters()) {
    if (p.frozen || !p.var.has_grad()) continue;
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = p.var.grad();
    if (p.momentum.empty()) p.momentum = Tensor(value.shape());
    const double wd = p.decay ? weight_decay : 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + wd * value[i];
      p.momentum[i] = momentum * p.momentum[i] + g;
      value[i] -= lr * p.momentum[i];
    }
  }
}

double learning_rate_at(const RunConfig& config, int epoch) {
  double lr = config.lr;
  for (int m : config.lr_milestones)
    if (epoch >= m) lr *= config.lr_gamma;
  return lr;
}

TrainBatch make_batch(const DatasetIndex& index, const std::vector<int>& sample_ids,
                      const std::vector<int>& class_of_identity) {
  std::vector<const SampleTriplet*> samples;
  TrainBatch batch;
  for (int id : sample_ids) {
    const auto& s = index.samples.at(static_cast<std::size_t>(id));
    if (!s.missing.is_complete()) throw UsageError("training samples must hold all modalities");
    samples.push_back(&s);
    const int cls = class_of_identity.at(static_cast<std::size_t>(s.identity));
    if (cls < 0) throw UsageError("sample identity is not a train identity");
    batch.labels.push_back(cls);
  }
  for (Modality m : kAllModalities) batch.images[static_cast<std::size_t>(index_of(m))] = stack_images(samples, m);
  return batch;
}

std::vector<int> class_map(const DatasetIndex& index, int* num_classes) {
  std::set<int> ids;
  int max_id = -1;
  for (const auto& s : index.samples) {
    max_id = std::max(max_id, s.identity);
    if (s.split == Split::Train) ids.insert(s.identity);
  }
  std::vector<int> map(static_cast<std::size_t>(max_id + 1), -1);
  int next = 0;
  for (int id : ids) map[static_cast<std::size_t>(id)] = next++;
  if (num_classes) *num_classes = next;
  return map;
}

Trainer::Trainer(const RunConfig& config, int num_classes)
    : Trainer(std::make_unique<DenetModel>(config, num_classes)) {}

Trainer::Trainer(std::unique_ptr<DenetModel> model)
    : model_(std::move(model)), dropout_rng_(model_->config().seed * 0x9E3779B97F4A7C15ULL + 3), lr_(model_->config().lr) {}

void Trainer::set_phase(int phase) {
  phase_ = phase;
  auto& store = model_->store();
  store.set_frozen("", false);
  if (phase == 0) {
    store.set_frozen("cmft/", true);
  } else if (phase == 1) {
    store.set_frozen("", true);
    store.set_frozen("cmft/", false);
  }
}

std::string Trainer::rng_state() const {
  std::ostringstream os;
  os << dropout_rng_;
  return os.str();
}

LossReport Trainer::forward(const TrainBatch& batch, bool apply) {
  const RunConfig& cfg = model_->config();
  const DenetModel& model = *model_;
  const bool reid_final = phase_ != 1;
  const bool with_cmft = phase_ != 0 && (cfg.use_rec || cfg.use_sim || cfg.reid_on_recovered);
  const bool reid_recovered = phase_ != 0 && cfg.reid_on_recovered;

  ModalityFeatures features;
  for (Modality m : kAllModalities)
    features[static_cast<std::size_t>(index_of(m))] =
        model.encoder(m).extract(ag::Var(batch.images[static_cast<std::size_t>(index_of(m))]), true);
  auto feature = [&](Modality m) -> const FeatureMap& { return *features[static_cast<std::size_t>(index_of(m))]; };

  std::vector<ag::Var> tri_terms, ce_terms, rec_terms, sim_terms;
  std::array<std::array<std::optional<FeatureMap>, kNumModalities>, kNumModalities> recovered;  // [source][target]
  if (with_cmft) {
    for (const auto& pair : model.cmft().pairs()) {
      FeatureMap src = feature(pair.source());
      FeatureMap real = feature(pair.target());
      if (cfg.cmft_detach_source) {
        src.data = ag::detach(src.data);
        real.data = ag::detach(real.data);
      }
      auto out = pair.transform(src, true);
      if (cfg.use_rec)
        rec_terms.push_back(reconstruction_loss(
            out.fake_image, ag::Var(batch.images[static_cast<std::size_t>(index_of(pair.target()))]),
            cfg.rec_reduction));
      if (cfg.use_sim) sim_terms.push_back(similarity_loss(model.cmft().head(pair.target()), real, out.recovered, true));
      recovered[static_cast<std::size_t>(index_of(pair.source()))][static_cast<std::size_t>(index_of(pair.target()))] =
          out.recovered;
    }
  }

  auto add_ce = [&](const ag::Var& embedding, const ClassifierHead& head) {
    auto normalized = ops::dropout(head.normalize(embedding, true), cfg.dropout, true, dropout_rng_);
    ce_terms.push_back(smoothed_cross_entropy(head.logits(normalized), batch.labels, cfg.smoothing));
  };
  // Final embeddings of every state seen this step share one triplet term,
  // so hardest pairs are mined across complete and recovered states.
  std::vector<ag::Var> final_embeddings;
  if (reid_final) {
    auto comp = compose_final(MissingState::complete(), features, model.graph());
    final_embeddings.push_back(comp.final);
    add_ce(comp.final, model.head());
    if (cfg.aux_branch_heads)
      for (Modality m : kAllModalities) {
        auto pooled = global_average_pool(feature(m));
        tri_terms.push_back(batch_hard_triplet(pooled, batch.labels, cfg.margin));
        add_ce(pooled, model.branch_head(m));
      }
  }
  if (reid_recovered) {
    // One incomplete state per step, cycling through all six.
    const auto states = enumerate_missing_states();
    const MissingState state = states[1 + static_cast<std::size_t>(step_ % (states.size() - 1))];
    ModalityFeatures mixed = features;
    for (Modality m : state.missing()) {
      const auto source = std::find_if(cfg.recovery_priority.begin(), cfg.recovery_priority.end(),
                                       [&](Modality p) { return state.has(p); });
      mixed[static_cast<std::size_t>(index_of(m))] =
          recovered[static_cast<std::size_t>(index_of(*source))][static_cast<std::size_t>(index_of(m))];
    }
    auto comp = compose_final(state, mixed, model.graph());
    final_embeddings.push_back(comp.final);
    add_ce(comp.final, model.head());
  }
  if (!final_embeddings.empty()) {
    std::vector<int> labels;
    for (std::size_t i = 0; i < final_embeddings.size(); ++i)
      labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
    auto stacked = final_embeddings.size() == 1 ? final_embeddings.front() : ops::concat_rows(final_embeddings);
    tri_terms.push_back(batch_hard_triplet(stacked, labels, cfg.margin));
  }

  auto total_of = [](const std::vector<ag::Var>& terms, bool average) -> ag::Var {
    if (terms.empty()) return ag::Var();
    ag::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ops::add(acc, terms[i]);
    return average ? ops::scale(acc, 1.0 / static_cast<double>(terms.size())) : acc;
  };
  ag::Var l_tri = total_of(tri_terms, false);
  ag::Var l_ce = total_of(ce_terms, false);
  ag::Var l_rec = total_of(rec_terms, true);
  ag::Var l_sim = total_of(sim_terms, true);
  auto scalar = [](const ag::Var& v) { return v.defined() ? v.value()[0] : 0.0; };

  LossParts parts{scalar(l_tri), scalar(l_ce), scalar(l_rec), scalar(l_sim)};
  LossReport report;
  try {
    report = total_loss(parts, cfg.rho, cfg.mu);
  } catch (const InvariantError&) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << epoch_ << " step " << step_ << ": l_tri=" << parts.l_tri
       << " l_ce=" << parts.l_ce << " l_rec=" << parts.l_rec << " l_sim=" << parts.l_sim;
    throw TrainingAborted(os.str());
  }
  if (!apply) return report;

  ag::Var total;
  auto accumulate = [&](const ag::Var& v, double w) {
    if (!v.defined()) return;
    ag::Var term = w == 1.0 ? v : ops::scale(v, w);
    total = total.defined() ? ops::add(total, term) : term;
  };
  accumulate(l_tri, 1.0);
  accumulate(l_ce, 1.0);
  accumulate(l_rec, cfg.rho);
  accumulate(l_sim, cfg.mu);
  auto& store = model_->store();
  store.zero_grad();
  if (total.defined() && total.requires_grad()) ag::backward(total);
  sgd_step(store, lr_, cfg.momentum, cfg.weight_decay);
  ++step_;
  return report;
}

LossReport Trainer::train_step(const TrainBatch& batch) { return forward(batch, true); }

LossReport Trainer::compute_losses(const TrainBatch& batch) {
  // Training-mode batch norm moves the running statistics; put them back.
  std::vector<Tensor> saved;
  for (const auto& [name, t] : model_->store().named_tensors()) saved.push_back(*t);
  LossReport report = forward(batch, false);
  auto tensors = model_->store().named_tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i].second = saved[i];
  return report;
}

std::vector<EpochSummary> Trainer::fit(const DatasetIndex& index, const std::string& log_path,
                                       const std::string& checkpoint_path) {
  const RunConfig& cfg = model_->config();
  std::vector<int> classes = class_map(index, nullptr);
  PkSampler sampler(index, cfg.identities_per_batch(), cfg.instances_per_id, cfg.seed * 1000003ULL + 17);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot write training log '" + log_path + "'");
    log << std::setprecision(17);
  }
  std::vector<EpochSummary> summaries;
  const int staged_split = cfg.epochs / 2;
  for (; epoch_ < cfg.epochs; ++epoch_) {
    int schedule_epoch = epoch_;
    if (cfg.schedule == TrainingSchedule::Staged) {
      const int phase = epoch_ < staged_split ? 0 : 1;
      if (phase != phase_) set_phase(phase);
      // Each phase runs the milestone schedule over its own span.
      const int start = phase == 0 ? 0 : staged_split;
      const int span = phase == 0 ? staged_split : cfg.epochs - staged_split;
      schedule_epoch = span > 0 ? (epoch_ - start) * cfg.epochs / span : 0;
    }
    lr_ = learning_rate_at(cfg, schedule_epoch);
    EpochSummary summary;
    summary.epoch = epoch_;
    summary.lr = lr_;
    for (const auto& ids : sampler.next_epoch()) {
      auto report = train_step(make_batch(index, ids, classes));
      summary.mean.l_tri += report.l_tri;
      summary.mean.l_ce += report.l_ce;
      summary.mean.l_rec += report.l_rec;
      summary.mean.l_sim += report.l_sim;
      summary.mean.total += report.total;
      ++summary.steps;
      if (log) log << "{\"event\":\"step\",\"epoch\":" << epoch_ << ",\"step\":" << step_ << ",\"lr\":" << lr_ << ","
                   << report.to_json_fields() << "}\n";
    }
    if (summary.steps > 0) {
      const double n = summary.steps;
      summary.mean.l_tri /= n;
      summary.mean.l_ce /= n;
      summary.mean.l_rec /= n;
      summary.mean.l_sim /= n;
      summary.mean.total /= n;
    }
    if (log) {
      log << "{\"event\":\"epoch\",\"epoch\":" << epoch_ << ",\"steps\":" << summary.steps << ",\"lr\":" << lr_ << ","
          << summary.mean.to_json_fields() << "}\n";
      log.flush();
    }
    summaries.push_back(summary);
    if (!checkpoint_path.empty()) save_checkpoint(*model_, rng_state(), checkpoint_path);
  }
  if (cfg.schedule == TrainingSchedule::Staged) set_phase(-1);
  return summaries;
}

std::vector<ScenarioSpec> fixed_scenarios() {
  return {
      {"no_missing", MissingState::of({}), std::nullopt},
      {"missing_NIR", MissingState::of({Modality::NIR}), std::nullopt},
      {"missing_TIR", MissingState::of({Modality::TIR}), std::nullopt},
      {"missing_NIR+TIR", MissingState::of({Modality::NIR, Modality::TIR}), std::nullopt},
  };
}

ScenarioSpec eta_scenario(double eta) {
  std::ostringstream os;
  os << "eta_" << eta;
  return {os.str(), std::nullopt, eta};
}

DatasetIndex apply_scenario(const DatasetIndex& index, const ScenarioSpec& scenario, std::uint64_t seed,
                            double* effective_eta) {
  if (scenario.dropped) {
    if (effective_eta) *effective_eta = 0.0;
    return fixed_missing(index, *scenario.dropped);
  }
  if (!scenario.eta) throw UsageError("scenario '" + scenario.name + "' has neither dropped modalities nor eta");
  const double eta = std::min(*scenario.eta, max_feasible_missing_rate(index));
  if (effective_eta) *effective_eta = eta;
  return simulate_missing(index, eta, seed);
}

MetricsReport evaluate_model(const DenetModel& model, const DatasetIndex& index, const std::string& scenario,
                             int max_rank) {
  std::vector<const SampleTriplet*> query, gallery;
  LabelSet ql, gl;
  int slots = 0;
  for (const auto& s : index.samples) {
    if (s.split == Split::Train) continue;
    slots += kNumModalities;
    auto& list = s.split == Split::Query ? query : gallery;
    auto& labels = s.split == Split::Query ? ql : gl;
    list.push_back(&s);
    labels.identities.push_back(s.identity);
    labels.cameras.push_back(s.camera);
  }
  if (query.empty() || gallery.empty()) throw ConfigError("dataset has an empty query or gallery split");
  auto report = evaluate_retrieval(embed_samples(query, model), ql, embed_samples(gallery, model), gl, max_rank);
  report.scenario = scenario;
  report.enhancement_mode = model.graph().mode();
  report.missing_rate = 1.0 - static_cast<double>(index.test_image_count()) / slots;
  report.config_echo = model.config().serialize();
  return report;
}

void write_report(const MetricsReport& report, const std::string& dir) {
  fs::create_directories(dir);
  report.write((fs::path(dir) / (report.scenario + ".json")).string());
  report.write_cmc_points((fs::path(dir) / (report.scenario + "_cmc.csv")).string());
}

DatasetIndex dataset_for(const RunConfig& config) {
  DatasetIndex index = config.data_dir.empty() ? generate_synthetic(SyntheticSpec::from_config(config))
                                               : load_dataset(config.data_dir);
  if (index.height != config.image_height || index.width != config.image_width)
    throw ConfigError("dataset images are " + std::to_string(index.height) + "x" + std::to_string(index.width) +
                      " but the config expects " + std::to_string(config.image_height) + "x" +
                      std::to_string(config.image_width));
  for (Modality m : kAllModalities)
    if (index.channels[static_cast<std::size_t>(index_of(m))] != config.image_channels(m))
      throw ConfigError(std::string("dataset channel count for ") + std::string(to_string(m)) +
                        " does not match the config");
  return index;
}

const MetricsReport& ExperimentResult::report(const std::string& scenario) const {
  for (const auto& r : reports)
    if (r.scenario == scenario) return r;
  throw UsageError("no report for scenario '" + scenario + "'");
}

std::vector<MetricsReport> evaluate_checkpoint(const std::string& checkpoint_path, const DatasetIndex& index,
                                               const std::vector<ScenarioSpec>& scenarios,
                                               std::optional<EnhancementMode> mode) {
  auto loaded = load_checkpoint(checkpoint_path);
  if (mode) loaded.model->graph().set_mode(*mode);
  const RunConfig& cfg = loaded.model->config();
  std::vector<MetricsReport> reports;
  for (const auto& scenario : scenarios) {
    double eta = 0.0;
    auto view = apply_scenario(index, scenario, cfg.missing_seed, &eta);
    auto report = evaluate_model(*loaded.model, view, scenario.name, cfg.max_rank);
    report.requested_missing_rate = scenario.eta.value_or(report.missing_rate);
    report.checkpoint_hash = loaded.sha256;
    reports.push_back(std::move(report));
  }
  return reports;
}

void write_eta_curve(const std::vector<MetricsReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "eta,requested_eta,mAP,rank1\n" << std::setprecision(10);
  for (const auto& r : reports)
    out << r.missing_rate << ',' << r.requested_missing_rate << ',' << r.mAP << ',' << r.rank(1) << '\n';
}

ExperimentResult run_experiment(const RunConfig& config, const std::string& out_dir,
                                const std::optional<DatasetIndex>& dataset) {
  config.validate();
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  config.save((root / "config.txt").string());
  const DatasetIndex index = dataset ? *dataset : dataset_for(config);

  int classes = 0;
  class_map(index, &classes);
  Trainer trainer(config, classes);
  ExperimentResult result;
  result.checkpoint_path = (root / "checkpoint.bin").string();
  result.epochs = trainer.fit(index, (root / "train_log.jsonl").string(), result.checkpoint_path);
  save_checkpoint(trainer.model(), trainer.rng_state(), result.checkpoint_path);
  result.checkpoint_hash = file_sha256(result.checkpoint_path);

  std::vector<ScenarioSpec> scenarios = fixed_scenarios();
  std::vector<double> etas = config.eta_sweep;
  if (std::find(etas.begin(), etas.end(), config.missing_rate) == etas.end()) etas.push_back(config.missing_rate);
  for (double eta : etas) scenarios.push_back(eta_scenario(eta));
  result.reports = evaluate_checkpoint(result.checkpoint_path, index, scenarios);

  const std::string metrics_dir = (root / "metrics").string();
  std::vector<MetricsReport> curve;
  for (const auto& r : result.reports) {
    if (r.checkpoint_hash != result.checkpoint_hash)
      throw InvariantError("evaluated checkpoint differs from the trained one");
    write_report(r, metrics_dir);
    for (double eta : config.eta_sweep)
      if (r.scenario == eta_scenario(eta).name) curve.push_back(r);
  }
  write_eta_curve(curve, (fs::path(metrics_dir) / "eta_curve.csv").string());
  return result;
}

}  // namespace denet
