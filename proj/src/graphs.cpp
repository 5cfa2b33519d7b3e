/* Copyright 2026 The PreGIP Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "pregip/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pregip {

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges,
             std::vector<double> features, std::size_t feature_dim,
             std::optional<int> label, std::string id)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      features_(std::move(features)),
      feature_dim_(feature_dim),
      label_(label),
      id_(std::move(id)) {
  if (features_.size() != num_nodes_ * feature_dim_) {
    throw Error("graph: feature matrix has " +
                std::to_string(features_.size()) + " values, expected " +
                std::to_string(num_nodes_) + "x" +
                std::to_string(feature_dim_));
  }
  for (auto& [u, v] : edges_) {
    if (u == v) throw Error("graph: self-loop on node " + std::to_string(u));
    if (u >= num_nodes_ || v >= num_nodes_) {
      throw Error("graph: edge (" + std::to_string(u) + "," +
                  std::to_string(v) + ") out of range for " +
                  std::to_string(num_nodes_) + " nodes");
    }
    if (u > v) std::swap(u, v);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

Graph Graph::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != num_nodes_) throw Error("graph: permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const auto& [u, v] : edges_) edges.emplace_back(perm[u], perm[v]);
  std::vector<double> features(features_.size());
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    std::copy_n(features_.begin() + v * feature_dim_, feature_dim_,
                features.begin() + perm[v] * feature_dim_);
  }
  return Graph(num_nodes_, std::move(edges), std::move(features), feature_dim_,
               label_, id_);
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    if (g.feature_dim() != feature_dim) {
      throw Error("dataset: graph " + std::to_string(i) + " has feature_dim " +
                  std::to_string(g.feature_dim()) + ", dataset has " +
                  std::to_string(feature_dim));
    }
    if (g.label() && num_classes &&
        (*g.label() < 0 ||
         static_cast<std::size_t>(*g.label()) >= *num_classes)) {
      throw Error("dataset: graph " + std::to_string(i) + " label " +
                  std::to_string(*g.label()) + " outside [0, " +
                  std::to_string(*num_classes) + ")");
    }
  }
}

FeatureMoments feature_moments(const Dataset& dataset) {
  const std::size_t d = dataset.feature_dim;
  std::size_t count = 0;
  std::vector<double> sum(d, 0.0);
  for (const Graph& g : dataset.graphs) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      const auto row = g.feature_row(v);
      for (std::size_t j = 0; j < d; ++j) sum[j] += row[j];
    }
    count += g.num_nodes();
  }
  if (count == 0) throw Error("feature_moments: dataset has no nodes");
  FeatureMoments m;
  m.mu.resize(d);
  for (std::size_t j = 0; j < d; ++j) m.mu[j] = sum[j] / double(count);
  // Two-pass variance.
  std::vector<double> sq(d, 0.0);
  for (const Graph& g : dataset.graphs) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      const auto row = g.feature_row(v);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = row[j] - m.mu[j];
        sq[j] += diff * diff;
      }
    }
  }
  m.sigma.resize(d);
  for (std::size_t j = 0; j < d; ++j) m.sigma[j] = std::sqrt(sq[j] / double(count));
  return m;
}

Graph sample_er_graph(std::size_t n, double p, const FeatureMoments& moments,
                      Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error("sample_er_graph: p must lie in [0, 1], got " +
                std::to_string(p));
  }
  if (moments.mu.size() != moments.sigma.size()) {
    throw Error("sample_er_graph: moments mu/sigma length mismatch");
  }
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  const std::size_t d = moments.mu.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> features(n * d);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = moments.sigma[j];
      features[v * d + j] = s > 0.0 ? moments.mu[j] + s * normal(rng)
                                    : moments.mu[j];
    }
  }
  return Graph(n, std::move(edges), std::move(features), d);
}

Graph augment(const Graph& g, Augmentation kind, double ratio, Rng& rng) {
  if (g.num_nodes() < 2) throw Error("augment: graph needs at least 2 nodes");
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw Error("augment: ratio must lie in [0, 1), got " +
                std::to_string(ratio));
  }
  const std::size_t n = g.num_nodes();
  const std::size_t d = g.feature_dim();
  if (kind == Augmentation::kNodeDrop) {
    std::size_t drop = static_cast<std::size_t>(std::floor(ratio * double(n)));
    drop = std::min(drop, n - 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> dropped(n, false);
    for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;
    std::vector<std::size_t> remap(n, n);
    std::vector<double> features;
    features.reserve((n - drop) * d);
    std::size_t next = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (dropped[v]) continue;
      remap[v] = next++;
      const auto row = g.feature_row(v);
      features.insert(features.end(), row.begin(), row.end());
    }
    std::vector<Edge> edges;
    for (const auto& [u, v] : g.edges())
      if (!dropped[u] && !dropped[v]) edges.emplace_back(remap[u], remap[v]);
    return Graph(next, std::move(edges), std::move(features), d, g.label(),
                 g.id());
  }

  const std::size_t m = g.num_edges();
  const std::size_t change =
      static_cast<std::size_t>(std::floor(ratio * double(m)));
  std::vector<Edge> kept = g.edges();
  std::shuffle(kept.begin(), kept.end(), rng);
  kept.resize(m - change);
  std::vector<Edge> absent;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (!g.has_edge(u, v)) absent.emplace_back(u, v);
  std::shuffle(absent.begin(), absent.end(), rng);
  const std::size_t add = std::min(change, absent.size());
  kept.insert(kept.end(), absent.begin(), absent.begin() + add);
  return Graph(n, std::move(kept), g.features(), d, g.label(), g.id());
}

// ---------------------------------------------------------------------- I/O

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["id"] = g.id();
  j["n"] = g.num_nodes();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  nlohmann::json x = nlohmann::json::array();
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto row = g.feature_row(v);
    x.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["x"] = std::move(x);
  // Zero-node graphs would otherwise lose their feature width.
  j["d"] = g.feature_dim();
  if (g.label()) j["y"] = *g.label();
  return j;
}

Graph graph_from_json(const nlohmann::json& record, std::size_t line) {
  const std::string where = "line " + std::to_string(line) + ": ";
  try {
    if (!record.is_object()) throw Error("record is not an object");
    const std::string id =
        record.contains("id") ? record.at("id").get<std::string>() : "";
    const auto n = record.at("n").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : record.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw Error("edge must be [u, v]");
      edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    const auto& x = record.at("x");
    if (!x.is_array() || x.size() != n) {
      throw Error("x must have one row per node");
    }
    std::size_t d = record.contains("d") ? record.at("d").get<std::size_t>()
                    : n > 0              ? x[0].size()
                                         : 0;
    std::vector<double> features;
    features.reserve(n * d);
    for (const auto& row : x) {
      if (!row.is_array() || row.size() != d) {
        throw Error("ragged feature matrix");
      }
      for (const auto& value : row) features.push_back(value.get<double>());
    }
    std::optional<int> label;
    if (record.contains("y") && !record.at("y").is_null()) {
      label = record.at("y").get<int>();
    }
    return Graph(n, std::move(edges), std::move(features), d, label, id);
  } catch (const Error& e) {
    throw Error(where + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(where + "malformed record: " + e.what());
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const Graph& g : dataset.graphs) out << graph_to_json(g).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  Dataset dataset;
  std::string text;
  std::size_t line = 0;
  bool have_dim = false;
  int max_label = -1;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error("line " + std::to_string(line) + ": " + e.what());
    }
    Graph g = graph_from_json(record, line);
    if (!have_dim) {
      dataset.feature_dim = g.feature_dim();
      have_dim = true;
    } else if (g.feature_dim() != dataset.feature_dim) {
      throw Error("line " + std::to_string(line) + ": feature_dim " +
                  std::to_string(g.feature_dim()) + " differs from " +
                  std::to_string(dataset.feature_dim));
    }
    if (g.label()) max_label = std::max(max_label, *g.label());
    dataset.graphs.push_back(std::move(g));
  }
  if (dataset.graphs.empty()) {
    throw Error(path.string() + ": no graph records");
  }
  if (max_label >= 0) dataset.num_classes = std::size_t(max_label) + 1;
  return dataset;
}

// ---------------------------------------------------------------- benchmark

Dataset synth_benchmark(const BenchmarkSpec& spec, Rng& rng) {
  if (spec.class_count < 1) throw Error("synth_benchmark: class_count < 1");
  if (spec.density_per_class.size() != spec.class_count ||
      spec.feature_shift_per_class.size() != spec.class_count) {
    throw Error("synth_benchmark: need one density and one shift per class");
  }
  if (spec.min_nodes < 2 || spec.min_nodes > spec.max_nodes) {
    throw Error("synth_benchmark: invalid size range");
  }
  for (double p : spec.density_per_class) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error("synth_benchmark: density outside [0, 1]");
    }
  }
  Dataset dataset;
  dataset.feature_dim = spec.feature_dim;
  dataset.num_classes = spec.class_count;
  std::uniform_int_distribution<std::size_t> size(spec.min_nodes,
                                                  spec.max_nodes);
  for (std::size_t i = 0; i < spec.num_graphs; ++i) {
    const std::size_t k = i % spec.class_count;
    FeatureMoments moments{
        std::vector<double>(spec.feature_dim, spec.feature_shift_per_class[k]),
        std::vector<double>(spec.feature_dim, 1.0)};
    const std::size_t n = size(rng);
    Graph g = sample_er_graph(n, spec.density_per_class[k], moments, rng);
    g.set_label(static_cast<int>(k));
    g.set_id("g" + std::to_string(i));
    dataset.graphs.push_back(std::move(g));
  }
  return dataset;
}

}  // namespace pregip
