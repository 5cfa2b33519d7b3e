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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "test_util.hpp"

namespace pregip {
namespace {

// Upper critical value of chi-square with k degrees of freedom at the given
// standard-normal quantile (Wilson-Hilferty).
double chi2_critical(double k, double z) {
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

double binomial_pmf(std::size_t n, std::size_t k, double p) {
  return std::exp(std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) -
                  std::lgamma(double(n - k) + 1) + double(k) * std::log(p) +
                  double(n - k) * std::log1p(-p));
}

FeatureMoments unit_moments(std::size_t d) {
  return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

TEST(GraphTest, CanonicalizesEdges) {
  const Graph g(3, {{2, 1}, {1, 2}, {0, 1}}, std::vector<double>(3, 0.0), 1);
  ASSERT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.edges()[0], Edge(0, 1));
  EXPECT_EQ(g.edges()[1], Edge(1, 2));
  EXPECT_TRUE(g.has_edge(2, 1));
  EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(GraphTest, RejectsInvalidInput) {
  EXPECT_THROW(Graph(2, {{1, 1}}, {0.0, 0.0}, 1), Error);
  EXPECT_THROW(Graph(2, {{0, 2}}, {0.0, 0.0}, 1), Error);
  EXPECT_THROW(Graph(2, {}, {0.0}, 1), Error);
}

TEST(GraphTest, PermutedRelabelsNodes) {
  const Graph g(3, {{0, 1}}, {1.0, 2.0, 3.0}, 1);
  const std::vector<std::size_t> perm = {2, 0, 1};
  const Graph p = g.permuted(perm);
  EXPECT_TRUE(p.has_edge(2, 0));
  EXPECT_EQ(p.num_edges(), 1u);
  EXPECT_EQ(p.feature_row(2)[0], 1.0);
  EXPECT_EQ(p.feature_row(0)[0], 2.0);
}

TEST(ErdosRenyiTest, EdgeCountMatchesBinomial) {
  const std::size_t n = 10, trials = 4000;
  const double p = 0.3;
  const std::size_t pairs = n * (n - 1) / 2;
  Rng rng(11);
  std::vector<std::size_t> hist(pairs + 1, 0);
  std::vector<std::size_t> per_pair(pairs, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    const Graph g = sample_er_graph(n, p, unit_moments(1), rng);
    ++hist[g.num_edges()];
    for (const auto& [u, v] : g.edges()) {
      // Index of (u, v), u < v, in row-major upper-triangle order.
      ++per_pair[u * n - u * (u + 1) / 2 + (v - u - 1)];
    }
  }
  // Edge count histogram against Binomial(pairs, p), pooling sparse tails.
  double chi2 = 0.0, obs_acc = 0.0, exp_acc = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = 0; k <= pairs; ++k) {
    obs_acc += double(hist[k]);
    exp_acc += double(trials) * binomial_pmf(pairs, k, p);
    if (exp_acc >= 5.0 || k == pairs) {
      chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / std::max(exp_acc, 1e-12);
      obs_acc = exp_acc = 0.0;
      ++bins;
    }
  }
  EXPECT_LT(chi2, chi2_critical(double(bins - 1), 3.09));

  // Every pair equally likely.
  const double expected = double(trials) * p;
  double chi2_pairs = 0.0;
  for (std::size_t c : per_pair) {
    chi2_pairs += (double(c) - expected) * (double(c) - expected) / expected;
  }
  EXPECT_LT(chi2_pairs, chi2_critical(double(pairs - 1), 3.09));
}

TEST(ErdosRenyiTest, ExtremeProbabilities) {
  Rng rng(3);
  EXPECT_EQ(sample_er_graph(8, 0.0, unit_moments(2), rng).num_edges(), 0u);
  EXPECT_EQ(sample_er_graph(8, 1.0, unit_moments(2), rng).num_edges(), 28u);
  EXPECT_EQ(sample_er_graph(1, 0.5, unit_moments(2), rng).num_edges(), 0u);
  EXPECT_THROW(sample_er_graph(4, 1.5, unit_moments(2), rng), Error);
}

TEST(ErdosRenyiTest, FeatureMomentsWithinOnePercent) {
  const FeatureMoments target{{1.0, -2.0, 0.5}, {0.5, 2.0, 0.0}};
  Rng rng(5);
  Dataset d;
  d.feature_dim = 3;
  for (int i = 0; i < 5000; ++i) d.graphs.push_back(sample_er_graph(40, 0.0, target, rng));
  const FeatureMoments m = feature_moments(d);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(m.mu[j], target.mu[j], 0.01 * std::max(std::abs(target.mu[j]), 0.1))
        << "dim " << j;
    EXPECT_NEAR(m.sigma[j], target.sigma[j], 0.01 * target.sigma[j] + 1e-12)
        << "dim " << j;
  }
  // A zero-variance dimension reproduces mu exactly.
  for (const auto& g : d.graphs) {
    for (std::size_t v = 0; v < g.num_nodes(); ++v) ASSERT_EQ(g.feature_row(v)[2], 0.5);
  }
}

TEST(FeatureMomentsTest, HandComputed) {
  Dataset d;
  d.feature_dim = 1;
  d.graphs.emplace_back(2, std::vector<Edge>{}, std::vector<double>{1.0, 3.0}, 1);
  d.graphs.emplace_back(1, std::vector<Edge>{}, std::vector<double>{5.0}, 1);
  const FeatureMoments m = feature_moments(d);
  EXPECT_DOUBLE_EQ(m.mu[0], 3.0);
  EXPECT_DOUBLE_EQ(m.sigma[0], std::sqrt(8.0 / 3.0));
}

TEST(AugmentTest, FuzzInvariants) {
  Rng rng(17);
  std::uniform_int_distribution<std::size_t> size(2, 15);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int iter = 0; iter < 10000; ++iter) {
    const std::size_t n = size(rng);
    Graph g = sample_er_graph(n, unit(rng), unit_moments(2), rng);
    g.set_label(iter % 3);
    g.set_id("g" + std::to_string(iter));
    const double ratio = 0.95 * unit(rng);
    const std::size_t m = g.num_edges();

    const Graph drop = augment(g, Augmentation::kNodeDrop, ratio, rng);
    const std::size_t dropped =
        std::min<std::size_t>(std::size_t(std::floor(ratio * double(n))), n - 1);
    ASSERT_EQ(drop.num_nodes(), n - dropped);
    ASSERT_LE(drop.num_edges(), m);
    ASSERT_EQ(drop.label(), g.label());
    ASSERT_EQ(drop.id(), g.id());
    // Surviving rows are original rows, in order.
    std::multiset<std::pair<double, double>> rows;
    for (std::size_t v = 0; v < n; ++v) {
      rows.insert({g.feature_row(v)[0], g.feature_row(v)[1]});
    }
    for (std::size_t v = 0; v < drop.num_nodes(); ++v) {
      const auto it = rows.find({drop.feature_row(v)[0], drop.feature_row(v)[1]});
      ASSERT_NE(it, rows.end());
      rows.erase(it);
    }

    const Graph pert = augment(g, Augmentation::kEdgePerturb, ratio, rng);
    const std::size_t change = std::size_t(std::floor(ratio * double(m)));
    const std::size_t absent = n * (n - 1) / 2 - m;
    ASSERT_EQ(pert.num_nodes(), n);
    ASSERT_EQ(pert.num_edges(), m - change + std::min(change, absent));
    ASSERT_EQ(pert.features(), g.features());
    std::size_t kept = 0;
    for (const auto& [u, v] : pert.edges()) kept += g.has_edge(u, v) ? 1 : 0;
    ASSERT_EQ(kept, m - change);
  }
}

TEST(AugmentTest, RejectsDegenerateInput) {
  Rng rng(1);
  const Graph single(1, {}, {0.0}, 1);
  EXPECT_THROW(augment(single, Augmentation::kNodeDrop, 0.2, rng), Error);
  const Graph pair(2, {{0, 1}}, {0.0, 0.0}, 1);
  EXPECT_THROW(augment(pair, Augmentation::kEdgePerturb, 1.0, rng), Error);
}

TEST(DatasetTest, RoundTripIsExact) {
  Dataset d = testing::small_dataset(30, 4);
  d.graphs[3].set_label(std::nullopt);
  const auto dir = testing::scratch_dir("dataset_roundtrip");
  save_dataset(d, dir / "d.jsonl");
  const Dataset back = load_dataset(dir / "d.jsonl");
  EXPECT_EQ(back.graphs, d.graphs);
  EXPECT_EQ(back.feature_dim, d.feature_dim);
}

TEST(DatasetTest, ErrorsCarryLineNumbers) {
  const auto dir = testing::scratch_dir("dataset_errors");
  {
    std::ofstream f(dir / "bad.jsonl");
    f << R"({"id":"a","n":2,"edges":[[0,1]],"x":[[0.0],[1.0]],"y":0})" << '\n';
    f << R"({"id":"b","n":2,"edges":[[0,0]],"x":[[0.0],[1.0]]})" << '\n';
  }
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  {
    std::ofstream f(dir / "ragged.jsonl");
    f << R"({"id":"a","n":2,"edges":[],"x":[[0.0],[1.0]]})" << '\n';
    f << R"({"id":"b","n":1,"edges":[],"x":[[0.0,1.0]]})" << '\n';
  }
  EXPECT_THROW(load_dataset(dir / "ragged.jsonl"), Error);
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), Error);
}

TEST(BenchmarkTest, DeterministicAndLabeled) {
  BenchmarkSpec spec;
  Rng a(9), b(9);
  const Dataset d1 = synth_benchmark(spec, a);
  const Dataset d2 = synth_benchmark(spec, b);
  EXPECT_EQ(d1, d2);
  ASSERT_EQ(d1.size(), 400u);
  EXPECT_EQ(d1.num_classes, std::optional<std::size_t>(2));
  std::map<int, std::pair<double, std::size_t>> density;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    const Graph& g = d1.graphs[i];
    ASSERT_EQ(g.label(), std::optional<int>(int(i % 2)));
    ASSERT_GE(g.num_nodes(), spec.min_nodes);
    ASSERT_LE(g.num_nodes(), spec.max_nodes);
    const double pairs = double(g.num_nodes() * (g.num_nodes() - 1) / 2);
    density[*g.label()].first += double(g.num_edges()) / pairs;
    ++density[*g.label()].second;
  }
  EXPECT_NEAR(density[0].first / double(density[0].second), 0.1, 0.01);
  EXPECT_NEAR(density[1].first / double(density[1].second), 0.3, 0.01);
}

}  // namespace
}  // namespace pregip
