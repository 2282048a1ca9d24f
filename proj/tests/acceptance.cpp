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

// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed here.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "denet/trainer.hpp"
#include "oracles.hpp"

using namespace denet;
using ag::Var;
namespace fs = std::filesystem;

namespace {

constexpr double kEnhanceTol = 1e-6;
constexpr double kIdentityTol = 1e-12;
constexpr double kClosedFormTol = 1e-9;
constexpr double kGradTol = 1e-3;
constexpr double kMetricTol = 1e-12;
constexpr double kTieTol = 0.02;
constexpr double kMinCleanMap = 0.5;
constexpr double kTrainBudgetSeconds = 15 * 60;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

RunConfig desk_config() { return RunConfig::load(std::string(DENET_SOURCE_DIR) + "/configs/desk.cfg"); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// 1 ------------------------------------------------------------------------
Outcome graph_cut() {
  Outcome o;
  int states = 0;
  for (auto state : enumerate_missing_states()) {
    ++states;
    const auto edges = cut_edges(EnhancementMode::Dynamic, state);
    for (const auto& e : edges)
      if (!state.has(e.source)) o.pass = false;
    if (static_cast<int>(edges.size()) != 6 - 2 * state.missing_count()) o.pass = false;
  }
  o.detail = std::to_string(states) + " states checked";
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome dimension_invariance() {
  RunConfig config = desk_config();
  DenetModel model(config, 4);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::set<std::size_t> dims;
  for (auto state : enumerate_missing_states()) {
    SampleTriplet s;
    s.missing = state;
    for (Modality m : state.available()) {
      Tensor img({config.image_channels(m), config.image_height, config.image_width});
      for (auto& v : img.values()) v = u(rng);
      s.images[static_cast<std::size_t>(index_of(m))] = img;
    }
    dims.insert(embed_sample(s, model).data.size());
  }
  Outcome o;
  o.pass = dims.size() == 1 && *dims.begin() == static_cast<std::size_t>(config.final_dim());
  o.detail = "D_final = " + std::to_string(*dims.begin()) + " for all 7 states (6C = " +
             std::to_string(config.final_dim()) + ")";
  return o;
}

void randomize(const EnhancementEdge& edge, std::mt19937_64& rng) {
  for (const nn::Conv2d* conv : {&edge.source_query, &edge.source_value, &edge.target_key, &edge.output}) {
    Var w = conv->weight, b = conv->bias;
    w.mutable_value() = oracle::random_tensor(w.shape(), rng, 0.5);
    b.mutable_value() = oracle::random_tensor(b.shape(), rng, 0.5);
  }
}

// 3 ------------------------------------------------------------------------
Outcome enhancement_oracle() {
  std::mt19937_64 rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    RunConfig config;
    config.widths = {4 * (1 + trial % 3)};
    config.dem_reduction = 2;
    config.dem_softmax = trial % 2 == 1;
    config.image_height = 8;
    config.image_width = 8;
    nn::ParameterStore store;
    const auto edges = all_edges();
    EnhancementEdge edge(store, config, edges[static_cast<std::size_t>(trial % 6)], rng);
    randomize(edge, rng);
    const int c = config.widths.back(), h = 2 + trial % 3, w = 1 + trial % 4, n = 1 + trial % 2;
    auto fs_t = oracle::random_tensor({n, c, h, w}, rng), ft = oracle::random_tensor({n, c, h, w}, rng);
    worst = std::max(worst, max_abs_diff(edge.enhance(Var(fs_t), Var(ft)).value(),
                                         oracle::enhance(edge, fs_t, ft, config.dem_softmax)));
  }
  return {worst <= kEnhanceTol, "max |diff| = " + fmt(worst) + " over 50 cases"};
}

// 4 ------------------------------------------------------------------------
Outcome residual_identity() {
  RunConfig config = desk_config();
  nn::ParameterStore store;
  std::mt19937_64 rng(29);
  EnhancementGraph graph(store, config, rng);
  double worst = 0.0;
  const int c = config.feature_channels();
  for (const auto& edge : graph.edges()) {
    randomize(edge, rng);
    Var w = edge.output.weight, b = edge.output.bias;
    w.mutable_value().fill(0.0);
    b.mutable_value().fill(0.0);
    auto fs_t = oracle::random_tensor({2, c, config.feature_height(), config.feature_width()}, rng);
    auto ft = oracle::random_tensor({2, c, config.feature_height(), config.feature_width()}, rng);
    FeatureMap src{Var(fs_t), edge.key().source, Provenance::Extracted};
    FeatureMap tgt{Var(ft), edge.key().target, Provenance::Extracted};
    worst = std::max(worst, max_abs_diff(enhance(edge, src, tgt).data.value(), ft));
  }
  return {worst <= kIdentityTol, "6 edges, max |diff| = " + fmt(worst)};
}

// 5 ------------------------------------------------------------------------
Outcome loss_closed_forms() {
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  check(triplet_loss(0.2, 0.9, 0.3), 0.0);
  check(triplet_loss(0.9, 0.2, 0.3), 1.0);
  check(triplet_loss(0.5, 0.5, 0.3), 0.3);
  for (int n : {2, 7, 16, 100}) {
    std::vector<double> logits(static_cast<std::size_t>(n), -1.25);
    check(smoothed_ce(logits, n / 2, 0.1), std::log(n));
  }
  std::mt19937_64 rng(31);
  Var img(oracle::random_tensor({3, 1, 4, 2}, rng));
  check(reconstruction_loss(img, img, RecReduction::Mean).value()[0], 0.0);
  check(reconstruction_loss(img, img, RecReduction::Sum).value()[0], 0.0);
  nn::ParameterStore store;
  auto head = ProjectionHead::create(store, "head", 8, 5, rng);
  head.recovered_fc.weight.mutable_value() = head.real_fc.weight.value();
  head.recovered_fc.bias.mutable_value() = head.real_fc.bias.value();
  FeatureMap f{Var(oracle::random_tensor({4, 8, 2, 2}, rng)), Modality::NIR, Provenance::Extracted};
  FeatureMap rec{f.data, Modality::NIR, Provenance::Recovered};
  check(similarity_loss(head, f, rec, true).value()[0], 0.0);
  return {worst <= kClosedFormTol, "max |diff| = " + fmt(worst)};
}

// 6 ------------------------------------------------------------------------
Outcome gradient_checks() {
  std::mt19937_64 rng(37);
  std::map<std::string, double> worst;
  {
    RunConfig config;
    config.widths = {6};
    config.dem_softmax = true;
    nn::ParameterStore store;
    EnhancementEdge edge(store, config, {Modality::RGB, Modality::NIR}, rng);
    randomize(edge, rng);
    Var fs_v(oracle::random_tensor({2, 6, 2, 2}, rng), true), ft(oracle::random_tensor({2, 6, 2, 2}, rng), true);
    Var probe(oracle::random_tensor({2, 6, 2, 2}, rng));
    worst["enhance"] = oracle::gradient_check(
        [&] { return ops::sum(ops::mul(edge.enhance(fs_v, ft), probe)); },
        {fs_v, ft, edge.source_query.weight, edge.source_value.weight, edge.target_key.weight, edge.output.weight});
  }
  {
    Var fake(oracle::random_tensor({2, 1, 4, 2}, rng), true), real(oracle::random_tensor({2, 1, 4, 2}, rng));
    worst["L_rec"] = std::max(
        oracle::gradient_check([&] { return reconstruction_loss(fake, real, RecReduction::Mean); }, {fake}),
        oracle::gradient_check([&] { return reconstruction_loss(fake, real, RecReduction::Sum); }, {fake}));
  }
  {
    nn::ParameterStore store;
    auto head = ProjectionHead::create(store, "head", 6, 4, rng);
    FeatureMap fr{Var(oracle::random_tensor({4, 6, 2, 1}, rng), true), Modality::TIR, Provenance::Extracted};
    FeatureMap fc{Var(oracle::random_tensor({4, 6, 2, 1}, rng), true), Modality::TIR, Provenance::Recovered};
    worst["L_sim"] = oracle::gradient_check([&] { return similarity_loss(head, fr, fc, true); },
                                            {fr.data, fc.data, head.real_fc.weight, head.recovered_fc.weight});
  }
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  {
    Var e(oracle::random_tensor({6, 4}, rng), true);
    worst["triplet"] = oracle::gradient_check([&] { return batch_hard_triplet(e, labels, 5.0); }, {e});
  }
  {
    Var logits(oracle::random_tensor({6, 3}, rng), true);
    worst["smoothed CE"] = oracle::gradient_check([&] { return smoothed_cross_entropy(logits, labels, 0.1); }, {logits});
  }
  Outcome o;
  std::ostringstream os;
  for (const auto& [name, v] : worst) {
    if (!(v <= kGradTol)) o.pass = false;
    os << (os.tellp() > 0 ? ", " : "") << name << " " << fmt(v, 2);
  }
  o.detail = "max relative error: " + os.str();
  return o;
}

// 7 ------------------------------------------------------------------------
Outcome metrics_oracle() {
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int nq = 2 + trial % 5, ng = 6 + trial % 7, dim = 2 + trial % 3;
    auto qe = oracle::random_tensor({nq, dim}, rng), ge = oracle::random_tensor({ng, dim}, rng);
    LabelSet ql, gl;
    std::uniform_int_distribution<int> id(0, 3), cam(0, 2);
    for (int i = 0; i < nq; ++i) ql.identities.push_back(id(rng)), ql.cameras.push_back(cam(rng));
    for (int i = 0; i < ng; ++i) gl.identities.push_back(id(rng)), gl.cameras.push_back(cam(rng));
    const int max_rank = 5;
    auto report = evaluate_retrieval(qe, ql, ge, gl, max_rank);
    double ap = 0;
    int valid = 0;
    std::vector<double> hits(max_rank, 0.0);
    for (int i = 0; i < nq; ++i) {
      std::vector<double> dist(static_cast<std::size_t>(ng));
      for (int j = 0; j < ng; ++j) {
        double s = 0;
        for (int c = 0; c < dim; ++c) s += std::pow(qe.at(i, c) - ge.at(j, c), 2);
        dist[static_cast<std::size_t>(j)] = std::sqrt(s);
      }
      bool good = false;
      const double a = oracle::average_precision(dist, gl.identities, gl.cameras, ql.identities[i], ql.cameras[i], &good);
      if (!good) continue;
      ++valid;
      ap += a;
      const int first = oracle::first_hit_rank(dist, gl.identities, gl.cameras, ql.identities[i], ql.cameras[i]);
      for (int k = first; k <= max_rank; ++k) hits[static_cast<std::size_t>(k - 1)] += 1;
    }
    if (valid == 0) {
      if (report.queries != 0) worst = 1.0;
      continue;
    }
    worst = std::max(worst, std::abs(report.mAP - ap / valid));
    for (int k = 1; k <= max_rank; ++k) worst = std::max(worst, std::abs(report.rank(k) - hits[k - 1] / valid));
  }
  return {worst <= kMetricTol, "30 instances, max |diff| = " + fmt(worst)};
}

// 8 ------------------------------------------------------------------------
Outcome missing_simulation() {
  auto index = generate_synthetic(SyntheticSpec::from_config(desk_config()));
  const int n = index.test_image_count();
  const double max_eta = max_feasible_missing_rate(index);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> eta_dist(0.0, max_eta);
  int bad_count = 0, emptied = 0, nondeterministic = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double eta = eta_dist(rng);
    const std::uint64_t seed = rng();
    auto out = simulate_missing(index, eta, seed);
    if (n - out.test_image_count() != static_cast<int>(std::lround(eta * n))) ++bad_count;
    for (const auto& s : out.samples)
      if (!validate_state(s.missing)) ++emptied;
    if (!(simulate_missing(index, eta, seed).samples == out.samples)) ++nondeterministic;
  }
  Outcome o;
  o.pass = bad_count == 0 && emptied == 0 && nondeterministic == 0;
  o.detail = "100 (eta, seed) pairs, N = " + std::to_string(n) + ": count mismatches " + std::to_string(bad_count) +
             ", emptied samples " + std::to_string(emptied) + ", nondeterministic " + std::to_string(nondeterministic);
  return o;
}

// 9-11 --------------------------------------------------------------------
struct Variant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> settings;
};

struct TrainedRuns {
  std::map<std::string, std::vector<ExperimentResult>> by_variant;
  std::map<std::string, std::string> errors;
  double slowest_seconds = 0.0;

  const std::vector<ExperimentResult>& at(const std::string& name) const {
    if (auto it = errors.find(name); it != errors.end())
      throw std::runtime_error("variant " + name + " failed to train: " + it->second);
    return by_variant.at(name);
  }
};

TrainedRuns train_all(const fs::path& root, const std::vector<Variant>& variants) {
  TrainedRuns runs;
  for (const auto& v : variants)
    for (auto seed : kSeeds) try {
      RunConfig config = desk_config();
      for (const auto& [k, val] : v.settings) config.set(k, val);
      config.seed = seed;
      const auto dir = root / (v.name + "_seed" + std::to_string(seed));
      fs::remove_all(dir);
      const auto start = Clock::now();
      runs.by_variant[v.name].push_back(run_experiment(config, dir.string()));
      const double secs = std::chrono::duration<double>(Clock::now() - start).count();
      runs.slowest_seconds = std::max(runs.slowest_seconds, secs);
      const auto& r = runs.by_variant[v.name].back();
      std::cout << "  trained " << v.name << " seed " << seed << " in " << fmt(secs, 3) << " s: no_missing "
                << fmt(r.report("no_missing").mAP) << ", missing_NIR " << fmt(r.report("missing_NIR").mAP)
                << ", missing_TIR " << fmt(r.report("missing_TIR").mAP) << ", missing_NIR+TIR "
                << fmt(r.report("missing_NIR+TIR").mAP) << ", eta_0.25 " << fmt(r.report("eta_0.25").mAP)
                << std::endl;
    } catch (const std::exception& ex) {
      runs.errors[v.name] = "seed " + std::to_string(seed) + ": " + ex.what();
      std::cout << "  " << v.name << " seed " << seed << " failed: " << ex.what() << std::endl;
      break;
    }
  return runs;
}

std::vector<double> maps(const std::vector<ExperimentResult>& runs, const std::string& scenario) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.report(scenario).mAP);
  return out;
}

Outcome end_to_end_trend(const TrainedRuns& runs) {
  const auto& full = runs.at("full");
  std::vector<double> one;
  for (const auto& r : full) one.push_back(0.5 * (r.report("missing_NIR").mAP + r.report("missing_TIR").mAP));
  const double clean = median(maps(full, "no_missing")), single = median(one),
               both = median(maps(full, "missing_NIR+TIR"));
  Outcome o;
  o.pass = clean >= single && single >= both && clean >= kMinCleanMap && runs.slowest_seconds < kTrainBudgetSeconds;
  o.detail = "median mAP no-missing " + fmt(clean) + " >= missing-one " + fmt(single) + " >= missing-NIR+TIR " +
             fmt(both) + ", no-missing >= " + fmt(kMinCleanMap) + ", slowest run " + fmt(runs.slowest_seconds, 3) + " s";
  return o;
}

Outcome ablation_direction(const TrainedRuns& runs) {
  Outcome o;
  std::ostringstream os;
  const double full = median(maps(runs.at("full"), "eta_0.25"));
  os << "eta=0.25 median mAP full " << fmt(full);
  for (const char* name : {"no_rec", "no_sim", "no_dem"}) {
    const double v = median(maps(runs.at(name), "eta_0.25"));
    if (full + kTieTol < v) o.pass = false;
    os << ", " << name << " " << fmt(v);
  }
  const double dynamic = median(maps(runs.at("full"), "missing_TIR"));
  const double fixed = median(maps(runs.at("fixed"), "missing_TIR"));
  if (dynamic + kTieTol < fixed) o.pass = false;
  os << "; missing-TIR dynamic " << fmt(dynamic) << " vs fixed " << fmt(fixed) << " (ties within " << kTieTol << ")";
  o.detail = os.str();
  return o;
}

Outcome single_checkpoint(const TrainedRuns& runs) {
  Outcome o;
  int checked = 0;
  for (const auto& [name, results] : runs.by_variant)
    for (const auto& r : results) {
      const auto on_disk = file_sha256(r.checkpoint_path);
      for (const auto& s : fixed_scenarios()) {
        ++checked;
        if (r.report(s.name).checkpoint_hash != on_disk || r.checkpoint_hash != on_disk) o.pass = false;
      }
    }
  if (checked == 0) o.pass = false;
  o.detail = std::to_string(checked) + " scenario reports carry their run's checkpoint hash";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  std::string work_dir = (fs::temp_directory_path() / "denet_acceptance").string();
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--work-dir", work_dir, "directory for training runs");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) { return only.empty() || std::count(only.begin(), only.end(), id) > 0; };

  struct Entry {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  std::optional<TrainedRuns> runs;
  auto trained = [&]() -> const TrainedRuns& {
    if (!runs) {
      std::vector<Variant> variants = {{"full", {}},
                                       {"no_rec", {{"use_rec", "false"}}},
                                       {"no_sim", {{"use_sim", "false"}}},
                                       {"no_dem", {{"enhancement_mode", "none"}}},
                                       {"fixed", {{"enhancement_mode", "fixed"}}}};
      if (!wanted(10)) variants.resize(1);
      runs = train_all(work_dir, variants);
    }
    return *runs;
  };
  const std::vector<Entry> entries = {
      {1, "graph-cut exhaustiveness", 1, graph_cut},
      {2, "dimension invariance", 10, dimension_invariance},
      {3, "enhancement oracle", 30, enhancement_oracle},
      {4, "residual identity", 5, residual_identity},
      {5, "loss closed forms", 5, loss_closed_forms},
      {6, "gradient checks", 120, gradient_checks},
      {7, "metrics oracle", 30, metrics_oracle},
      {8, "missing simulation", 30, missing_simulation},
      {9, "end-to-end trend", 0, [&] { return end_to_end_trend(trained()); }},
      {10, "ablation direction", 0, [&] { return ablation_direction(trained()); }},
      {11, "single-checkpoint property", 0, [&] { return single_checkpoint(trained()); }},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (!wanted(e.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    // Training criteria carry their own per-run budget inside the check.
    if (e.budget_seconds > 0 && secs >= e.budget_seconds) {
      o.pass = false;
      o.detail += "; exceeded " + fmt(e.budget_seconds) + " s";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << e.id << "] " << e.name << ": " << o.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
