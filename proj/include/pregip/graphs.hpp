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
#ifndef PREGIP_GRAPHS_HPP_
#define PREGIP_GRAPHS_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pregip/error.hpp"
#include "pregip/rng.hpp"

namespace pregip {

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected simple graph with a dense node-feature matrix.
class Graph {
 public:
  Graph() = default;
  // Canonicalizes edges to (min, max), sorted and deduplicated. Throws on
  // self-loops, out-of-range endpoints or a feature matrix whose size is not
  // num_nodes * feature_dim.
  Graph(std::size_t num_nodes, std::vector<Edge> edges,
        std::vector<double> features, std::size_t feature_dim,
        std::optional<int> label = std::nullopt, std::string id = {});

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& features() const { return features_; }
  std::span<const double> feature_row(std::size_t v) const {
    return {features_.data() + v * feature_dim_, feature_dim_};
  }
  const std::optional<int>& label() const { return label_; }
  const std::string& id() const { return id_; }

  void set_label(std::optional<int> label) { label_ = label; }
  void set_id(std::string id) { id_ = std::move(id); }

  bool has_edge(std::size_t u, std::size_t v) const;

  // Relabels node v as perm[v].
  Graph permuted(std::span<const std::size_t> perm) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> features_;
  std::size_t feature_dim_ = 0;
  std::optional<int> label_;
  std::string id_;
};

struct Dataset {
  std::vector<Graph> graphs;
  std::size_t feature_dim = 0;
  std::optional<std::size_t> num_classes;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }
  // Throws when a graph disagrees on feature_dim or carries a label outside
  // [0, num_classes).
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct FeatureMoments {
  std::vector<double> mu;
  std::vector<double> sigma;  // population standard deviation
};

// Per-dimension mean and population standard deviation over every node of
// every graph.
FeatureMoments feature_moments(const Dataset& dataset);

// G(n, p) with node features drawn i.i.d. from N(mu, diag(sigma^2)).
// Dimensions with sigma == 0 reproduce mu exactly.
Graph sample_er_graph(std::size_t n, double p, const FeatureMoments& moments,
                      Rng& rng);

enum class Augmentation { kNodeDrop, kEdgePerturb };

// node_drop removes floor(ratio * n) uniformly chosen nodes (at most n - 1)
// and their incident edges. edge_perturb removes floor(ratio * |E|) edges and
// adds as many uniformly chosen pairs that were absent in `g` (fewer when
// not enough absent pairs exist).
Graph augment(const Graph& g, Augmentation kind, double ratio, Rng& rng);

// One JSON object per line: {"id", "n", "edges", "x", "y"?}.
nlohmann::json graph_to_json(const Graph& g);
// `line` is only used for error messages.
Graph graph_from_json(const nlohmann::json& record, std::size_t line);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct BenchmarkSpec {
  std::size_t num_graphs = 400;
  std::size_t feature_dim = 8;
  std::size_t class_count = 2;
  std::size_t min_nodes = 12;
  std::size_t max_nodes = 28;
  std::vector<double> density_per_class = {0.1, 0.3};
  std::vector<double> feature_shift_per_class = {0.0, 1.0};
};

// Labeled dataset: graph i has class i mod class_count, a uniform size in
// [min_nodes, max_nodes], ER structure with the class density and features
// N(shift_k * 1, I). Identical densities and shifts give an unseparable
// dataset; that is allowed.
Dataset synth_benchmark(const BenchmarkSpec& spec, Rng& rng);

}  // namespace pregip

#endif  // PREGIP_GRAPHS_HPP_
