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

#include "denet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace denet {

std::string_view to_string(EnhancementMode mode) {
  switch (mode) {
    case EnhancementMode::Dynamic:
      return "dynamic";
    case EnhancementMode::Fixed:
      return "fixed";
    case EnhancementMode::SingleDirection:
      return "single-direction";
    case EnhancementMode::None:
      return "none";
  }
  return "?";
}

EnhancementMode parse_enhancement_mode(std::string_view text) {
  if (text == "dynamic") return EnhancementMode::Dynamic;
  if (text == "fixed") return EnhancementMode::Fixed;
  if (text == "single-direction") return EnhancementMode::SingleDirection;
  if (text == "none") return EnhancementMode::None;
  throw ConfigError("unknown enhancement mode '" + std::string(text) + "'");
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string token;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(token));
      token.clear();
    } else {
      token += c;
    }
  }
  if (!trim(token).empty() || !out.empty()) out.push_back(trim(token));
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto text = trim(value);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  auto v = trim(value);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, value);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os << std::setprecision(17) << values[i];
    } else {
      os << values[i];
    }
  }
  return os.str();
}

struct Field {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(std::string key, std::string doc, T RunConfig::*member) {
  return {key, doc,
          [key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string key, std::string doc, double RunConfig::*member) {
  return {key, doc,
          [key, member](RunConfig& c, std::string_view v) {
            c.*member = parse_number<double>(key, v);
          },
          [member](const RunConfig& c) { return fmt_double(c.*member); }};
}

Field bool_field(std::string key, std::string doc, bool RunConfig::*member) {
  return {key, doc,
          [key, member](RunConfig& c, std::string_view v) { c.*member = parse_bool(key, v); },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"widths", "comma-separated channel width of each stride-2 conv block",
                 [](RunConfig& c, std::string_view v) {
                   c.widths.clear();
                   for (auto& t : split_list(v)) c.widths.push_back(parse_number<int>("widths", t));
                 },
                 [](const RunConfig& c) { return join(c.widths); }});
    f.push_back(int_field("in_channels", "encoder input channels; 1-channel images are replicated",
                          &RunConfig::in_channels));
    f.push_back(int_field("image_height", "input image height", &RunConfig::image_height));
    f.push_back(int_field("image_width", "input image width", &RunConfig::image_width));
    f.push_back(int_field("nir_channels", "stored NIR channels (1 or 3)", &RunConfig::nir_channels));
    f.push_back(int_field("tir_channels", "stored TIR channels (1 or 3)", &RunConfig::tir_channels));
    f.push_back({"attention_placement", "final | every_block",
                 [](RunConfig& c, std::string_view v) {
                   auto t = trim(v);
                   if (t == "final") {
                     c.attention_placement = AttentionPlacement::Final;
                   } else if (t == "every_block") {
                     c.attention_placement = AttentionPlacement::EveryBlock;
                   } else {
                     bad_value("attention_placement", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.attention_placement == AttentionPlacement::Final
                                          ? "final"
                                          : "every_block");
                 }});
    f.push_back(int_field("attention_reduction", "channel-attention MLP reduction ratio",
                          &RunConfig::attention_reduction));
    f.push_back(int_field("spatial_kernel", "spatial-attention conv kernel size (odd)",
                          &RunConfig::spatial_kernel));
    f.push_back(int_field("embed_dim", "projection-head embedding dimension for L_sim",
                          &RunConfig::embed_dim));
    f.push_back({"rec_reduction", "mean | sum reduction of the pixel reconstruction loss",
                 [](RunConfig& c, std::string_view v) {
                   auto t = trim(v);
                   if (t == "mean") {
                     c.rec_reduction = RecReduction::Mean;
                   } else if (t == "sum") {
                     c.rec_reduction = RecReduction::Sum;
                   } else {
                     bad_value("rec_reduction", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.rec_reduction == RecReduction::Mean ? "mean" : "sum");
                 }});
    f.push_back(bool_field("cmft_detach_source",
                           "stop transformation gradients at the source feature",
                           &RunConfig::cmft_detach_source));
    f.push_back({"recovery_priority", "source order used to recover a missing modality",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<Modality> order;
                   for (auto& t : split_list(v)) {
                     try {
                       order.push_back(parse_modality(t));
                     } catch (const UsageError&) {
                       bad_value("recovery_priority", v);
                     }
                   }
                   c.recovery_priority = order;
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (auto m : c.recovery_priority) {
                     if (!out.empty()) out += ',';
                     out += to_string(m);
                   }
                   return out;
                 }});
    f.push_back({"enhancement_mode", "dynamic | fixed | single-direction | none",
                 [](RunConfig& c, std::string_view v) {
                   c.enhancement_mode = parse_enhancement_mode(trim(v));
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.enhancement_mode)); }});
    f.push_back(int_field("dem_reduction", "enhancement-edge channel reduction r (C' = C/r)",
                          &RunConfig::dem_reduction));
    f.push_back(bool_field("dem_softmax", "softmax-normalize the affinity over source positions",
                           &RunConfig::dem_softmax));
    f.push_back(double_field("margin", "triplet margin alpha", &RunConfig::margin));
    f.push_back(double_field("smoothing", "label smoothing beta", &RunConfig::smoothing));
    f.push_back(double_field("rho", "weight of L_rec", &RunConfig::rho));
    f.push_back(double_field("mu", "weight of L_sim", &RunConfig::mu));
    f.push_back(bool_field("use_rec", "enable the reconstruction loss", &RunConfig::use_rec));
    f.push_back(bool_field("use_sim", "enable the similarity loss", &RunConfig::use_sim));
    f.push_back(bool_field("reid_on_recovered",
                           "also apply ReID losses to the RGB-only embedding built from recovered "
                           "features",
                           &RunConfig::reid_on_recovered));
    f.push_back(bool_field("aux_branch_heads", "per-branch triplet + CE auxiliary heads",
                           &RunConfig::aux_branch_heads));
    f.push_back(double_field("dropout", "dropout before the identity classifier",
                             &RunConfig::dropout));
    f.push_back(double_field("lr", "initial learning rate", &RunConfig::lr));
    f.push_back({"lr_milestones", "epochs at which lr is multiplied by lr_gamma",
                 [](RunConfig& c, std::string_view v) {
                   c.lr_milestones.clear();
                   for (auto& t : split_list(v))
                     if (!t.empty()) c.lr_milestones.push_back(parse_number<int>("lr_milestones", t));
                 },
                 [](const RunConfig& c) { return join(c.lr_milestones); }});
    f.push_back(double_field("lr_gamma", "lr decay factor at each milestone", &RunConfig::lr_gamma));
    f.push_back(double_field("momentum", "SGD momentum", &RunConfig::momentum));
    f.push_back(double_field("weight_decay", "SGD weight decay", &RunConfig::weight_decay));
    f.push_back(int_field("epochs", "training epochs", &RunConfig::epochs));
    f.push_back(int_field("batch_size", "P*K batch size", &RunConfig::batch_size));
    f.push_back(int_field("instances_per_id", "K samples per identity in a batch",
                          &RunConfig::instances_per_id));
    f.push_back({"schedule", "joint | staged (transformation trained after the backbone)",
                 [](RunConfig& c, std::string_view v) {
                   auto t = trim(v);
                   if (t == "joint") {
                     c.schedule = TrainingSchedule::Joint;
                   } else if (t == "staged") {
                     c.schedule = TrainingSchedule::Staged;
                   } else {
                     bad_value("schedule", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.schedule == TrainingSchedule::Joint ? "joint" : "staged");
                 }});
    f.push_back(int_field("seed", "parameter init, sampler and dropout seed", &RunConfig::seed));
    f.push_back({"data_dir", "dataset directory (empty: generate synthetic data in memory)",
                 [](RunConfig& c, std::string_view v) { c.data_dir = trim(v); },
                 [](const RunConfig& c) { return c.data_dir; }});
    f.push_back(int_field("n_train_ids", "synthetic training identities", &RunConfig::n_train_ids));
    f.push_back(int_field("n_test_ids", "synthetic test identities", &RunConfig::n_test_ids));
    f.push_back(int_field("samples_per_id", "synthetic samples per identity",
                          &RunConfig::samples_per_id));
    f.push_back(int_field("n_cameras", "synthetic camera count (round-robin)",
                          &RunConfig::n_cameras));
    f.push_back(int_field("queries_per_id", "test samples per identity placed in the query split",
                          &RunConfig::queries_per_id));
    f.push_back(double_field("noise_sigma", "synthetic pixel noise level", &RunConfig::noise_sigma));
    f.push_back(double_field("latent_jitter", "synthetic per-sample latent perturbation",
                             &RunConfig::latent_jitter));
    f.push_back(int_field("data_seed", "synthetic dataset seed", &RunConfig::data_seed));
    f.push_back(double_field("missing_rate", "eta used by random-missing evaluation",
                             &RunConfig::missing_rate));
    f.push_back(int_field("missing_seed", "seed of the missing-modality simulation",
                          &RunConfig::missing_seed));
    f.push_back({"eta_sweep", "missing rates evaluated by the eta sweep",
                 [](RunConfig& c, std::string_view v) {
                   c.eta_sweep.clear();
                   for (auto& t : split_list(v))
                     if (!t.empty()) c.eta_sweep.push_back(parse_number<double>("eta_sweep", t));
                 },
                 [](const RunConfig& c) { return join(c.eta_sweep); }});
    f.push_back(int_field("max_rank", "length of the reported CMC curve", &RunConfig::max_rank));
    return f;
  }();
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

int RunConfig::feature_height() const {
  int h = image_height;
  for (std::size_t i = 0; i < widths.size(); ++i) h = (h + 1) / 2;
  return h;
}

int RunConfig::feature_width() const {
  int w = image_width;
  for (std::size_t i = 0; i < widths.size(); ++i) w = (w + 1) / 2;
  return w;
}

int RunConfig::image_channels(Modality m) const {
  switch (m) {
    case Modality::RGB:
      return 3;
    case Modality::NIR:
      return nir_channels;
    case Modality::TIR:
      return tir_channels;
  }
  return 3;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (widths.empty()) fail("widths must list at least one block");
  for (int w : widths)
    if (w <= 0) fail("widths must be positive");
  if (in_channels != 1 && in_channels != 3) fail("in_channels must be 1 or 3");
  if (image_height <= 0 || image_width <= 0) fail("image size must be positive");
  const int factor = 1 << widths.size();
  if (image_height % factor != 0 || image_width % factor != 0)
    fail("image size must be divisible by 2^blocks so the up-sample path restores it");
  for (int ch : {nir_channels, tir_channels})
    if (ch != 1 && ch != 3) fail("nir_channels/tir_channels must be 1 or 3");
  if (attention_reduction < 1) fail("attention_reduction must be >= 1");
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) fail("spatial_kernel must be odd");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (dem_reduction < 1 || feature_channels() % dem_reduction != 0)
    fail("dem_reduction must be >= 1 and divide the final width");
  if (recovery_priority.size() != 3) fail("recovery_priority must list all three modalities");
  {
    MissingState seen;
    for (auto m : recovery_priority) seen = seen.with(m);
    if (!seen.is_complete()) fail("recovery_priority must list all three modalities");
  }
  if (!(margin > 0)) fail("margin must be > 0");
  if (!(smoothing >= 0 && smoothing < 1)) fail("smoothing must lie in [0,1)");
  if (!(rho >= 0)) fail("rho must be >= 0");
  if (!(mu >= 0)) fail("mu must be >= 0");
  if (!(dropout >= 0 && dropout < 1)) fail("dropout must lie in [0,1)");
  if (!(lr >= 0)) fail("lr must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0,1)");
  if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
  if (epochs < 0) fail("epochs must be >= 0");
  if (instances_per_id < 2) fail("instances_per_id must be >= 2 for triplet mining");
  if (batch_size % instances_per_id != 0 || identities_per_batch() < 2)
    fail("batch_size must be a multiple of instances_per_id with at least 2 identities");
  if (n_train_ids < 2 || n_test_ids < 2) fail("at least 2 identities per split are required");
  if (samples_per_id < instances_per_id) fail("samples_per_id must be >= instances_per_id");
  if (n_cameras < 1) fail("n_cameras must be >= 1");
  if (queries_per_id < 1 || queries_per_id >= samples_per_id)
    fail("queries_per_id must leave gallery samples");
  if (!(noise_sigma >= 0)) fail("noise_sigma must be >= 0");
  if (!(latent_jitter >= 0)) fail("latent_jitter must be >= 0");
  if (!(missing_rate >= 0 && missing_rate <= 1)) fail("missing_rate must lie in [0,1]");
  for (double eta : eta_sweep)
    if (!(eta >= 0 && eta <= 1)) fail("eta_sweep values must lie in [0,1]");
  if (max_rank < 1) fail("max_rank must be >= 1");
}

void RunConfig::set(std::string_view key, std::string_view value) {
  find_field(trim(key)).set(*this, value);
}

std::string RunConfig::get(std::string_view key) const { return find_field(key).get(*this); }

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
  return os.str();
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file '" + path + "'");
  for (const auto& f : fields()) out << "# " << f.doc << '\n' << f.key << " = " << f.get(*this) << '\n';
}

const std::vector<std::pair<std::string, std::string>>& RunConfig::describe() {
  static const auto docs = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.doc);
    return out;
  }();
  return docs;
}

std::pair<std::string, std::string> split_override(std::string_view text) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos)
    throw UsageError("override '" + std::string(text) + "' is not key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

}  // namespace denet
