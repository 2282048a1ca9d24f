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

#include "denet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "denet/image_io.hpp"

namespace fs = std::filesystem;

namespace denet {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Query:
      return "query";
    case Split::Gallery:
      return "gallery";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "query") return Split::Query;
  if (text == "gallery") return Split::Gallery;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

const Tensor& SampleTriplet::image(Modality m) const {
  const auto& img = images[static_cast<std::size_t>(index_of(m))];
  if (!img) throw UsageError("sample has no " + std::string(to_string(m)) + " image");
  return *img;
}

bool SampleTriplet::operator==(const SampleTriplet& other) const {
  if (identity != other.identity || camera != other.camera || sequence != other.sequence ||
      split != other.split || missing != other.missing)
    return false;
  for (std::size_t m = 0; m < images.size(); ++m) {
    if (images[m].has_value() != other.images[m].has_value()) return false;
    if (images[m] && (images[m]->shape() != other.images[m]->shape() ||
                      max_abs_diff(*images[m], *other.images[m]) != 0.0))
      return false;
  }
  return true;
}

std::vector<int> DatasetIndex::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) out.push_back(static_cast<int>(i));
  return out;
}

int DatasetIndex::test_image_count() const {
  int n = 0;
  for (const auto& s : samples)
    if (s.split != Split::Train) n += s.missing.count();
  return n;
}

SyntheticSpec SyntheticSpec::from_config(const RunConfig& config) {
  SyntheticSpec spec;
  spec.n_train_ids = config.n_train_ids;
  spec.n_test_ids = config.n_test_ids;
  spec.samples_per_identity = config.samples_per_id;
  spec.n_cameras = config.n_cameras;
  spec.queries_per_identity = config.queries_per_id;
  spec.height = config.image_height;
  spec.width = config.image_width;
  for (Modality m : kAllModalities) spec.channels[static_cast<std::size_t>(index_of(m))] = config.image_channels(m);
  spec.noise_sigma = config.noise_sigma;
  spec.latent_jitter = config.latent_jitter;
  spec.seed = config.data_seed;
  return spec;
}

void SyntheticSpec::validate() const {
  if (n_train_ids < 2 || n_test_ids < 2) throw ConfigError("synthetic data needs >= 2 identities per split");
  if (samples_per_identity < 2) throw ConfigError("synthetic data needs >= 2 samples per identity");
  if (queries_per_identity < 1 || queries_per_identity >= samples_per_identity)
    throw ConfigError("queries_per_identity must leave gallery samples");
  if (n_cameras < 1 || height < 1 || width < 1 || latent_dim < 1)
    throw ConfigError("invalid synthetic geometry");
  if (!(noise_sigma >= 0) || !(latent_jitter >= 0)) throw ConfigError("noise levels must be >= 0");
}

namespace {

// Smooth pattern: a few signed Gaussian blobs per channel.
Tensor random_pattern(int c, int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor p({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int blob = 0; blob < 3; ++blob) {
      const double cy = unit(rng) * h, cx = unit(rng) * w;
      const double sy = (0.12 + 0.25 * unit(rng)) * h, sx = (0.12 + 0.25 * unit(rng)) * w;
      const double amp = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + unit(rng));
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double dy = (y - cy) / sy, dx = (x - cx) / sx;
          p[(static_cast<std::size_t>(ch) * h + y) * w + x] += amp * std::exp(-0.5 * (dy * dy + dx * dx));
        }
    }
  }
  return p;
}

struct Renderer {
  Tensor bias;
  std::vector<Tensor> basis;  // latent_dim patterns
  std::vector<double> camera_gain;
};

}  // namespace

DatasetIndex generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Fixed per-modality rendering transforms.
  std::array<Renderer, kNumModalities> renderers;
  for (Modality m : kAllModalities) {
    auto& r = renderers[static_cast<std::size_t>(index_of(m))];
    const int c = spec.channels[static_cast<std::size_t>(index_of(m))];
    r.bias = random_pattern(c, spec.height, spec.width, rng);
    for (auto& v : r.bias.values()) v *= 0.3;
    for (int k = 0; k < spec.latent_dim; ++k) r.basis.push_back(random_pattern(c, spec.height, spec.width, rng));
    for (int cam = 0; cam < spec.n_cameras; ++cam) r.camera_gain.push_back(0.8 + 0.4 * unit(rng));
  }

  const int n_ids = spec.n_train_ids + spec.n_test_ids;
  std::vector<std::vector<double>> latents(static_cast<std::size_t>(n_ids));
  for (auto& z : latents) {
    z.resize(static_cast<std::size_t>(spec.latent_dim));
    for (auto& v : z) v = normal(rng);
  }

  DatasetIndex index;
  index.height = spec.height;
  index.width = spec.width;
  index.channels = spec.channels;
  const int max_shift = std::max(1, spec.width / 16);
  for (int id = 0; id < n_ids; ++id) {
    for (int seq = 0; seq < spec.samples_per_identity; ++seq) {
      SampleTriplet s;
      s.identity = id;
      s.sequence = seq;
      s.camera = seq % spec.n_cameras;
      if (id < spec.n_train_ids) {
        s.split = Split::Train;
      } else {
        s.split = seq < spec.queries_per_identity ? Split::Query : Split::Gallery;
      }
      // Aligned shift shared by all modalities of the sample.
      const int shift = static_cast<int>(seq % (2 * max_shift + 1)) - max_shift;
      for (Modality m : kAllModalities) {
        const auto& r = renderers[static_cast<std::size_t>(index_of(m))];
        const int c = spec.channels[static_cast<std::size_t>(index_of(m))];
        std::vector<double> z = latents[static_cast<std::size_t>(id)];
        for (auto& v : z) v += spec.latent_jitter * normal(rng);
        Tensor img({c, spec.height, spec.width});
        const double gain = r.camera_gain[static_cast<std::size_t>(s.camera)];
        for (int ch = 0; ch < c; ++ch)
          for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
              const int sx = std::clamp(x - shift, 0, spec.width - 1);
              const std::size_t src = (static_cast<std::size_t>(ch) * spec.height + y) * spec.width + sx;
              double pre = r.bias[src];
              for (int k = 0; k < spec.latent_dim; ++k) pre += z[static_cast<std::size_t>(k)] * r.basis[static_cast<std::size_t>(k)][src];
              double v = 1.0 / (1.0 + std::exp(-gain * pre));
              if (spec.noise_sigma > 0) v += spec.noise_sigma * normal(rng);
              img[(static_cast<std::size_t>(ch) * spec.height + y) * spec.width + x] = v;
            }
        quantize_to_u8(img);
        s.images[static_cast<std::size_t>(index_of(m))] = std::move(img);
      }
      index.samples.push_back(std::move(s));
    }
  }
  return index;
}

std::string sample_path(const SampleTriplet& s, Modality m) {
  char name[64];
  std::snprintf(name, sizeof(name), "%04d_%d_%04d.png", s.identity, s.camera, s.sequence);
  return std::string(to_string(s.split)) + "/" + std::string(to_string(m)) + "/" + name;
}

void write_dataset(const DatasetIndex& index, const std::string& root) {
  for (Split split : {Split::Train, Split::Query, Split::Gallery})
    for (Modality m : kAllModalities)
      fs::create_directories(fs::path(root) / to_string(split) / to_string(m));
  std::ofstream manifest(fs::path(root) / kManifestName);
  if (!manifest) throw std::runtime_error("cannot write manifest in '" + root + "'");
  manifest << kManifestMagic << ' ' << kManifestVersion << '\n';
  manifest << "height " << index.height << '\n' << "width " << index.width << '\n';
  manifest << "channels " << index.channels[0] << ' ' << index.channels[1] << ' ' << index.channels[2] << '\n';
  manifest << "samples " << index.samples.size() << '\n';
  for (const auto& s : index.samples) {
    manifest << to_string(s.split) << ' ' << s.identity << ' ' << s.camera << ' ' << s.sequence << ' '
             << s.missing.label() << '\n';
    for (Modality m : s.missing.available()) write_png((fs::path(root) / sample_path(s, m)).string(), s.image(m));
  }
  if (!manifest) throw std::runtime_error("failed writing manifest in '" + root + "'");
}

DatasetIndex load_dataset(const std::string& root) {
  std::ifstream in(fs::path(root) / kManifestName);
  if (!in) throw ConfigError("no dataset manifest in '" + root + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kManifestMagic || version != kManifestVersion)
    throw ConfigError("unsupported manifest format in '" + root + "'");
  DatasetIndex index;
  std::string key;
  std::size_t count = 0;
  in >> key >> index.height >> key >> index.width >> key >> index.channels[0] >> index.channels[1] >>
      index.channels[2] >> key >> count;
  if (!in) throw ConfigError("malformed manifest header in '" + root + "'");
  for (std::size_t i = 0; i < count; ++i) {
    std::string split, state;
    SampleTriplet s;
    in >> split >> s.identity >> s.camera >> s.sequence >> state;
    if (!in) throw ConfigError("manifest truncated in '" + root + "'");
    s.split = parse_split(split);
    s.missing = parse_modality_set(state);
    for (Modality m : s.missing.available()) {
      const auto path = fs::path(root) / sample_path(s, m);
      if (!fs::exists(path)) throw ConfigError("missing image file '" + path.string() + "'");
      s.images[static_cast<std::size_t>(index_of(m))] = read_png(path.string());
    }
    index.samples.push_back(std::move(s));
  }
  return index;
}

double max_feasible_missing_rate(const DatasetIndex& index) {
  const int n = index.test_image_count();
  if (n == 0) return 0.0;
  int removable = 0;
  for (const auto& s : index.samples)
    if (s.split != Split::Train) removable += s.missing.count() - 1;
  return static_cast<double>(removable) / n;
}

DatasetIndex simulate_missing(const DatasetIndex& index, double eta, std::uint64_t seed) {
  if (!(eta >= 0 && eta <= 1)) throw ConfigError("missing rate must lie in [0, 1]");
  const int n = index.test_image_count();
  const int to_remove = static_cast<int>(std::lround(eta * n));
  std::vector<std::pair<int, Modality>> slots;
  int removable = 0;
  for (std::size_t i = 0; i < index.samples.size(); ++i) {
    const auto& s = index.samples[i];
    if (s.split == Split::Train) continue;
    removable += s.missing.count() - 1;
    for (Modality m : s.missing.available()) slots.emplace_back(static_cast<int>(i), m);
  }
  if (to_remove > removable) {
    char msg[160];
    std::snprintf(msg, sizeof(msg), "missing rate %.4f is infeasible; the largest feasible rate is %.4f",
                  eta, max_feasible_missing_rate(index));
    throw ConfigError(msg);
  }
  DatasetIndex out = index;
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  int removed = 0;
  for (const auto& [i, m] : slots) {
    if (removed == to_remove) break;
    auto& s = out.samples[static_cast<std::size_t>(i)];
    if (s.missing.count() <= 1) continue;
    s.missing = s.missing.without(m);
    s.images[static_cast<std::size_t>(index_of(m))].reset();
    ++removed;
  }
  return out;
}

DatasetIndex fixed_missing(const DatasetIndex& index, MissingState modalities) {
  if (modalities.is_complete()) throw ConfigError("cannot drop all three modalities");
  DatasetIndex out = index;
  for (auto& s : out.samples) {
    if (s.split == Split::Train) continue;
    for (Modality m : modalities.available()) {
      s.missing = s.missing.without(m);
      s.images[static_cast<std::size_t>(index_of(m))].reset();
    }
    if (s.missing.empty()) throw ConfigError("fixed_missing would empty a sample");
  }
  return out;
}

PkSampler::PkSampler(const DatasetIndex& index, int identities_per_batch, int instances,
                     std::uint64_t seed)
    : p_(identities_per_batch), k_(instances), rng_(seed) {
  std::map<int, std::vector<int>> groups;
  for (int i : index.indices_of(Split::Train)) groups[index.samples[static_cast<std::size_t>(i)].identity].push_back(i);
  for (auto& [id, members] : groups) {
    if (static_cast<int>(members.size()) < k_)
      throw ConfigError("identity " + std::to_string(id) + " has fewer than " + std::to_string(k_) +
                        " training samples");
    identities_.push_back(id);
    by_identity_.push_back(members);
  }
  if (static_cast<int>(identities_.size()) < p_)
    throw ConfigError("fewer training identities than identities per batch");
}

std::vector<std::vector<int>> PkSampler::next_epoch() {
  // Chunk every identity's shuffled samples into groups of K; a short tail is
  // topped up from the same identity.
  std::vector<std::vector<std::vector<int>>> chunks(by_identity_.size());
  for (std::size_t id = 0; id < by_identity_.size(); ++id) {
    auto members = by_identity_[id];
    std::shuffle(members.begin(), members.end(), rng_);
    for (std::size_t start = 0; start < members.size(); start += static_cast<std::size_t>(k_)) {
      std::vector<int> chunk(members.begin() + static_cast<long>(start),
                             members.begin() + static_cast<long>(std::min(members.size(), start + k_)));
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      while (static_cast<int>(chunk.size()) < k_) {
        int extra = members[pick(rng_)];
        if (std::find(chunk.begin(), chunk.end(), extra) == chunk.end()) chunk.push_back(extra);
      }
      chunks[id].push_back(std::move(chunk));
    }
  }
  // Always draw from the identities with the most chunks left, random among
  // ties, so all identities drain evenly.
  std::vector<std::vector<int>> batches;
  std::vector<std::size_t> order(by_identity_.size());
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return chunks[a].size() > chunks[b].size(); });
    if (chunks[order[static_cast<std::size_t>(p_ - 1)]].empty()) break;
    std::vector<int> batch;
    for (int j = 0; j < p_; ++j) {
      auto& pool = chunks[order[static_cast<std::size_t>(j)]];
      batch.insert(batch.end(), pool.back().begin(), pool.back().end());
      pool.pop_back();
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace denet
