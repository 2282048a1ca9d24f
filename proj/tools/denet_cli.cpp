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

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "denet/trainer.hpp"

namespace fs = std::filesystem;
using namespace denet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;
constexpr const char* kOutputRootEnv = "DENET_OUTPUT_ROOT";

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
};

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

/// Relative paths land under the output root; the directory must be new or
/// empty so earlier results are never overwritten.
fs::path claim_output_dir(const std::string& requested, const std::string& command) {
  fs::path dir = requested.empty() ? output_root() / command : fs::path(requested);
  if (dir.is_relative() && std::getenv(kOutputRootEnv)) dir = output_root() / dir;
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw UsageError("output directory '" + dir.string() + "' already holds results");
  fs::create_directories(dir);
  return dir;
}

RunConfig resolve_config(const Common& common, const fs::path& log_dir) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : RunConfig::load(common.config_path);
  for (const auto& text : common.overrides) {
    auto [key, value] = split_override(text);
    const auto& keys = RunConfig::describe();
    if (std::none_of(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; }))
      throw UsageError("unknown config key '" + key + "'");
    config.set(key, value);
  }
  config.validate();
  if (!log_dir.empty()) {
    std::ofstream log(log_dir / "overrides.txt");
    for (const auto& text : common.overrides) log << text << '\n';
    config.save((log_dir / "config.txt").string());
  }
  return config;
}

void add_common(CLI::App* cmd, Common& common, bool with_config = true) {
  if (with_config) cmd->add_option("--config", common.config_path, "config file (key = value lines)");
  cmd->add_option("--out", common.out, "output directory (relative paths resolve under $DENET_OUTPUT_ROOT)");
  cmd->add_option("overrides", common.overrides, "key=value config overrides");
}

ScenarioSpec scenario_from(const std::string& missing, std::optional<double> eta) {
  if (eta) {
    if (!missing.empty()) throw UsageError("--missing and --eta are exclusive");
    return eta_scenario(*eta);
  }
  if (missing.empty()) return fixed_scenarios().front();
  const MissingState dropped = parse_modality_set(missing);
  for (const auto& s : fixed_scenarios())
    if (s.dropped == dropped) return s;
  throw ConfigError("cannot drop every modality");
}

DatasetIndex dataset_from(const RunConfig& config, const std::string& data_dir) {
  if (data_dir.empty()) return dataset_for(config);
  RunConfig c = config;
  c.data_dir = data_dir;
  return dataset_for(c);
}

std::vector<double> parse_etas(const std::string& text) {
  std::vector<double> etas;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      etas.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid missing rate '" + item + "'");
    }
  }
  if (etas.empty()) throw ConfigError("--etas is empty");
  return etas;
}

void print_summary(const std::vector<MetricsReport>& reports) {
  std::cout << std::left << std::setw(18) << "scenario" << std::right << std::setw(8) << "eta" << std::setw(8)
            << "mAP" << std::setw(8) << "R1" << std::setw(8) << "R5" << std::setw(8) << "R10" << '\n'
            << std::fixed << std::setprecision(4);
  for (const auto& r : reports)
    std::cout << std::left << std::setw(18) << r.scenario << std::right << std::setw(8) << r.missing_rate
              << std::setw(8) << r.mAP << std::setw(8) << r.rank(1) << std::setw(8) << r.rank(5) << std::setw(8)
              << r.rank(10) << '\n';
}

struct ReportRow {
  std::string run;
  MetricsReport metrics;
};

/// Collects <dir>/metrics/*.json (or <dir>/*.json) from every run dir.
std::vector<ReportRow> collect_reports(const std::vector<std::string>& run_dirs) {
  std::vector<ReportRow> rows;
  for (const auto& dir : run_dirs) {
    fs::path metrics = fs::path(dir) / "metrics";
    if (!fs::is_directory(metrics)) metrics = dir;
    if (!fs::is_directory(metrics)) {
      std::cerr << "skipped " << dir << ": not a directory\n";
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(metrics))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      std::cerr << "skipped " << dir << ": no report files\n";
      continue;
    }
    for (const auto& f : files) {
      try {
        rows.push_back({fs::path(dir).filename().string(), MetricsReport::read(f.string())});
      } catch (const std::exception& e) {
        std::cerr << "skipped " << f.string() << ": " << e.what() << '\n';
      }
    }
  }
  return rows;
}

void write_table(const std::vector<ReportRow>& rows, const fs::path& out) {
  std::size_t run_w = 3, scen_w = 8;
  for (const auto& r : rows) {
    run_w = std::max(run_w, r.run.size());
    scen_w = std::max(scen_w, r.metrics.scenario.size());
  }
  std::ostringstream text;
  text << std::left << std::setw(static_cast<int>(run_w) + 2) << "run" << std::setw(static_cast<int>(scen_w) + 2)
       << "scenario" << std::right << std::setw(8) << "mAP" << std::setw(8) << "Rank-1" << std::setw(8) << "Rank-5"
       << std::setw(8) << "Rank-10" << '\n'
       << std::fixed << std::setprecision(2);
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    text << std::left << std::setw(static_cast<int>(run_w) + 2) << r.run << std::setw(static_cast<int>(scen_w) + 2)
         << m.scenario << std::right << std::setw(8) << 100 * m.mAP << std::setw(8) << 100 * m.rank(1) << std::setw(8)
         << 100 * m.rank(5) << std::setw(8) << 100 * m.rank(10) << '\n';
    table.push_back({{"run", r.run}, {"scenario", m.scenario}, {"mAP", m.mAP}, {"rank1", m.rank(1)},
                     {"rank5", m.rank(5)}, {"rank10", m.rank(10)}});
  }
  std::ofstream(out / "report.txt") << text.str();
  std::ofstream(out / "report.json") << table.dump(2) << '\n';
  std::cout << text.str();
}

struct AblationMember {
  std::string name;
  std::vector<std::pair<std::string, std::string>> settings;
};

std::vector<AblationMember> ablation_grid(const std::string& grid) {
  std::vector<AblationMember> members;
  if (grid == "components") {
    for (int dem : {0, 1})
      for (int sim : {0, 1})
        for (int rec : {0, 1}) {
          AblationMember m;
          m.name = std::string("rec") + (rec ? "+" : "-") + "_sim" + (sim ? "+" : "-") + "_dem" + (dem ? "+" : "-");
          m.settings = {{"use_rec", rec ? "true" : "false"},
                        {"use_sim", sim ? "true" : "false"},
                        {"enhancement_mode", dem ? "dynamic" : "none"}};
          members.push_back(m);
        }
  } else if (grid == "modes") {
    for (const char* mode : {"dynamic", "fixed", "single-direction", "none"})
      members.push_back({std::string("mode_") + mode, {{"enhancement_mode", mode}}});
  } else {
    throw UsageError("unknown ablation grid '" + grid + "' (components | modes)");
  }
  return members;
}

int run(int argc, char** argv) {
  CLI::App app{"Partial multi-modality re-identification pipeline"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
  add_common(gen, common);

  bool no_eval = false;
  auto* train = app.add_subcommand("train", "train one model, save the checkpoint and evaluate every scenario");
  add_common(train, common);
  train->add_flag("--no-eval", no_eval, "stop after saving the checkpoint");

  std::string checkpoint, missing, data_dir, mode_text;
  std::optional<double> eta;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint under one missing scenario");
  add_common(eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--missing", missing, "modalities dropped from every test sample, e.g. NIR,TIR");
  eval->add_option("--eta", eta, "random missing rate instead of a fixed scenario");
  eval->add_option("--data", data_dir, "dataset directory (default: the checkpoint's config)");
  eval->add_option("--mode", mode_text, "enhancement mode used at test time");

  std::string grid = "components";
  auto* ablate = app.add_subcommand("ablate", "train and evaluate an ablation grid");
  add_common(ablate, common);
  ablate->add_option("--grid", grid, "components (rec x sim x DEM) | modes");

  std::string etas_text = "0,0.25,0.5,0.75";
  auto* sweep = app.add_subcommand("sweep-eta", "evaluate over a list of random missing rates");
  add_common(sweep, common);
  sweep->add_option("--etas", etas_text, "comma-separated missing rates");
  sweep->add_option("--checkpoint", checkpoint, "checkpoint file (default: train one first)");
  sweep->add_option("--data", data_dir, "dataset directory");

  auto* exporter = app.add_subcommand("export-embeddings", "write test-split embeddings as CSV");
  add_common(exporter, common, false);
  exporter->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exporter->add_option("--missing", missing, "modalities dropped from every test sample");
  exporter->add_option("--eta", eta, "random missing rate");
  exporter->add_option("--data", data_dir, "dataset directory");

  std::vector<std::string> run_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "tabulate the metrics of completed run directories");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (gen->parsed()) {
    auto out = claim_output_dir(common.out, "gen-data");
    auto config = resolve_config(common, out);
    auto index = generate_synthetic(SyntheticSpec::from_config(config));
    write_dataset(index, (out / "data").string());
    std::cout << "wrote " << index.samples.size() << " samples to " << (out / "data").string() << '\n';
  } else if (train->parsed()) {
    auto out = claim_output_dir(common.out, "train");
    auto config = resolve_config(common, out);
    if (no_eval) {
      auto index = dataset_for(config);
      int classes = 0;
      class_map(index, &classes);
      Trainer trainer(config, classes);
      const auto ckpt = (out / "checkpoint.bin").string();
      trainer.fit(index, (out / "train_log.jsonl").string(), ckpt);
      save_checkpoint(trainer.model(), trainer.rng_state(), ckpt);
      std::cout << "checkpoint " << ckpt << " sha256 " << file_sha256(ckpt) << '\n';
    } else {
      auto result = run_experiment(config, out.string());
      print_summary(result.reports);
    }
  } else if (eval->parsed()) {
    std::optional<EnhancementMode> mode;
    if (!mode_text.empty()) mode = parse_enhancement_mode(mode_text);
    auto out = claim_output_dir(common.out, "eval");
    auto loaded = load_checkpoint(checkpoint);
    auto index = dataset_from(loaded.model->config(), data_dir);
    auto reports = evaluate_checkpoint(checkpoint, index, {scenario_from(missing, eta)}, mode);
    write_report(reports.front(), out.string());
    print_summary(reports);
  } else if (ablate->parsed()) {
    auto out = claim_output_dir(common.out, "ablate");
    auto base = resolve_config(common, out);
    const auto index = dataset_for(base);
    std::vector<std::string> dirs;
    for (const auto& member : ablation_grid(grid)) {
      RunConfig config = base;
      for (const auto& [k, v] : member.settings) config.set(k, v);
      config.validate();
      std::cout << "== " << member.name << '\n';
      auto result = run_experiment(config, (out / member.name).string(), index);
      print_summary(result.reports);
      dirs.push_back((out / member.name).string());
    }
    auto rows = collect_reports(dirs);
    std::vector<ReportRow> focus;
    const std::string scenario = eta_scenario(base.missing_rate).name;
    for (const auto& r : rows)
      if (r.metrics.scenario == scenario) focus.push_back(r);
    write_table(focus, out);
  } else if (sweep->parsed()) {
    auto out = claim_output_dir(common.out, "sweep-eta");
    auto etas = parse_etas(etas_text);
    std::string ckpt = checkpoint;
    DatasetIndex index;
    if (ckpt.empty()) {
      auto config = resolve_config(common, out);
      index = dataset_from(config, data_dir);
      int classes = 0;
      class_map(index, &classes);
      Trainer trainer(config, classes);
      ckpt = (out / "checkpoint.bin").string();
      trainer.fit(index, (out / "train_log.jsonl").string(), ckpt);
      save_checkpoint(trainer.model(), trainer.rng_state(), ckpt);
    } else {
      index = dataset_from(load_checkpoint(ckpt).model->config(), data_dir);
    }
    std::vector<ScenarioSpec> scenarios;
    for (double e : etas) scenarios.push_back(eta_scenario(e));
    auto reports = evaluate_checkpoint(ckpt, index, scenarios);
    for (const auto& r : reports) write_report(r, (out / "metrics").string());
    write_eta_curve(reports, (out / "eta_curve.csv").string());
    print_summary(reports);
  } else if (exporter->parsed()) {
    auto out = claim_output_dir(common.out, "export-embeddings");
    auto loaded = load_checkpoint(checkpoint);
    const RunConfig& config = loaded.model->config();
    auto index = dataset_from(config, data_dir);
    auto view = apply_scenario(index, scenario_from(missing, eta), config.missing_seed, nullptr);
    std::vector<const SampleTriplet*> samples;
    for (const auto& s : view.samples)
      if (s.split != Split::Train) samples.push_back(&s);
    auto embeddings = embed_samples(samples, *loaded.model);
    std::ofstream csv(out / "embeddings.csv");
    csv << "split,identity,camera,sequence,state";
    for (int d = 0; d < embeddings.dim(1); ++d) csv << ",f" << d;
    csv << '\n' << std::setprecision(10);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = *samples[i];
      csv << to_string(s.split) << ',' << s.identity << ',' << s.camera << ',' << s.sequence << ','
          << s.missing.label();
      for (int d = 0; d < embeddings.dim(1); ++d) csv << ',' << embeddings.at(static_cast<int>(i), d);
      csv << '\n';
    }
    std::cout << "wrote " << samples.size() << " embeddings of dimension " << embeddings.dim(1) << '\n';
  } else if (report->parsed()) {
    auto rows = collect_reports(run_dirs);
    if (rows.empty()) throw std::runtime_error("no metrics reports found in the given run directories");
    auto out = claim_output_dir(report_out, "report");
    write_table(rows, out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
