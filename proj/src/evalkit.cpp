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

#include "denet/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "denet/kernels.hpp"

namespace denet {

Tensor distance_matrix(const Tensor& q, const Tensor& g) {
  if (q.rank() != 2 || g.rank() != 2 || q.dim(1) != g.dim(1))
    throw UsageError("distance_matrix: embeddings must be (Q,D) and (G,D) with equal D");
  Tensor out({q.dim(0), g.dim(0)});
  kernels::parallel::euclidean_distances(q.dim(0), g.dim(0), q.dim(1), q.values(), g.values(), out.values());
  return out;
}

RankingResult rank_gallery(const Tensor& distances, const LabelSet& query, const LabelSet& gallery) {
  const int nq = distances.dim(0), ng = distances.dim(1);
  if (static_cast<int>(query.identities.size()) != nq || static_cast<int>(gallery.identities.size()) != ng ||
      query.cameras.size() != query.identities.size() || gallery.cameras.size() != gallery.identities.size())
    throw UsageError("rank_gallery: label counts do not match the distance matrix");
  RankingResult r;
  r.order.resize(static_cast<std::size_t>(nq));
  r.good.resize(static_cast<std::size_t>(nq));
  std::vector<int> base(static_cast<std::size_t>(ng));
  std::iota(base.begin(), base.end(), 0);
  for (int i = 0; i < nq; ++i) {
    std::vector<int> order = base;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return distances.at(i, a) < distances.at(i, b); });
    const int qid = query.identities[static_cast<std::size_t>(i)];
    const int qcam = query.cameras[static_cast<std::size_t>(i)];
    auto& kept = r.order[static_cast<std::size_t>(i)];
    auto& good = r.good[static_cast<std::size_t>(i)];
    for (int j : order) {
      const int gid = gallery.identities[static_cast<std::size_t>(j)];
      const int gcam = gallery.cameras[static_cast<std::size_t>(j)];
      if (gid == qid && gcam == qcam) continue;  // junk
      kept.push_back(j);
      good.push_back(gid == qid ? 1 : 0);
    }
  }
  return r;
}

std::optional<double> average_precision(std::span<const char> good_in_rank_order) {
  double hits = 0.0, acc = 0.0;
  for (std::size_t rank = 0; rank < good_in_rank_order.size(); ++rank) {
    if (!good_in_rank_order[rank]) continue;
    hits += 1.0;
    acc += hits / static_cast<double>(rank + 1);
  }
  if (hits == 0.0) return std::nullopt;
  return acc / hits;
}

std::vector<double> cmc_curve(const std::vector<std::vector<char>>& good_in_rank_order, int max_rank) {
  std::vector<double> cmc(static_cast<std::size_t>(max_rank), 0.0);
  int valid = 0;
  for (const auto& good : good_in_rank_order) {
    auto first = std::find(good.begin(), good.end(), 1);
    if (first == good.end()) continue;
    ++valid;
    const auto pos = static_cast<int>(first - good.begin());
    for (int k = pos; k < max_rank; ++k) cmc[static_cast<std::size_t>(k)] += 1.0;
  }
  if (valid > 0)
    for (auto& v : cmc) v /= valid;
  return cmc;
}

MetricsReport evaluate_retrieval(const Tensor& query_embeddings, const LabelSet& query,
                                 const Tensor& gallery_embeddings, const LabelSet& gallery,
                                 int max_rank) {
  auto dist = distance_matrix(query_embeddings, gallery_embeddings);
  auto ranking = rank_gallery(dist, query, gallery);
  MetricsReport report;
  double sum_ap = 0.0;
  for (const auto& good : ranking.good) {
    auto ap = average_precision(good);
    if (ap) {
      sum_ap += *ap;
      ++report.queries;
    } else {
      ++report.skipped_queries;
    }
  }
  report.mAP = report.queries > 0 ? sum_ap / report.queries : 0.0;
  report.cmc = cmc_curve(ranking.good, max_rank);
  return report;
}

double MetricsReport::rank(int k) const {
  if (cmc.empty()) return 0.0;
  return cmc[static_cast<std::size_t>(std::clamp(k, 1, static_cast<int>(cmc.size())) - 1)];
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["enhancement_mode"] = std::string(to_string(enhancement_mode));
  j["requested_missing_rate"] = requested_missing_rate;
  j["missing_rate"] = missing_rate;
  j["mAP"] = mAP;
  j["rank1"] = rank(1);
  j["rank5"] = rank(5);
  j["rank10"] = rank(10);
  j["cmc"] = cmc;
  j["queries"] = queries;
  j["skipped_queries"] = skipped_queries;
  j["checkpoint_hash"] = checkpoint_hash;
  j["config"] = config_echo;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    auto j = nlohmann::json::parse(text);
    r.scenario = j.at("scenario").get<std::string>();
    r.enhancement_mode = parse_enhancement_mode(j.at("enhancement_mode").get<std::string>());
    r.requested_missing_rate = j.value("requested_missing_rate", 0.0);
    r.missing_rate = j.value("missing_rate", 0.0);
    r.mAP = j.at("mAP").get<double>();
    r.cmc = j.at("cmc").get<std::vector<double>>();
    r.queries = j.value("queries", 0);
    r.skipped_queries = j.value("skipped_queries", 0);
    r.checkpoint_hash = j.value("checkpoint_hash", std::string());
    r.config_echo = j.value("config", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

void MetricsReport::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  out << to_json() << '\n';
}

MetricsReport MetricsReport::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

void MetricsReport::write_cmc_points(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "rank,cmc\n";
  for (std::size_t k = 0; k < cmc.size(); ++k) out << k + 1 << ',' << cmc[k] << '\n';
}

}  // namespace denet
