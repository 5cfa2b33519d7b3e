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
#include "pregip/pretrain.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "pregip/attacks.hpp"
#include "test_util.hpp"

namespace pregip {
namespace {

// InfoNCE written out directly from its definition.
double info_nce_oracle(const std::vector<Embedding>& z1,
                       const std::vector<Embedding>& z2, double tau) {
  auto cosine = [](const Embedding& a, const Embedding& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    return (aa == 0.0 || bb == 0.0) ? 0.0 : ab / std::sqrt(aa * bb);
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < z2.size(); ++j) denom += std::exp(cosine(z1[i], z2[j]) / tau);
    loss += -std::log(std::exp(cosine(z1[i], z2[i]) / tau) / denom);
  }
  return loss / double(z1.size());
}

std::vector<Embedding> rows(const std::vector<double>& flat, std::size_t n,
                            std::size_t d) {
  std::vector<Embedding> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(flat.begin() + i * d, flat.begin() + (i + 1) * d);
  return out;
}

std::vector<const Graph*> pointers(const std::vector<Graph>& graphs) {
  std::vector<const Graph*> out;
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

TEST(InfoNceTest, MatchesDefinition) {
  Rng rng(1);
  const std::size_t n = 6, d = 4;
  const auto a = testing::random_vector(n * d, 1.0, rng);
  const auto b = testing::random_vector(n * d, 1.0, rng);
  ad::Tape tape;
  const double tape_loss =
      info_nce_loss(tape, ad::Tensor::from({n, d}, a), ad::Tensor::from({n, d}, b), 0.5).item();
  const double oracle = info_nce_oracle(rows(a, n, d), rows(b, n, d), 0.5);
  EXPECT_NEAR(tape_loss, oracle, 1e-12);
  EXPECT_NEAR(info_nce_loss(rows(a, n, d), rows(b, n, d), 0.5), oracle, 1e-12);
}

TEST(InfoNceTest, IdenticalOrthogonalViewsHaveKnownLoss) {
  // z1 = z2 = I_n: positives have similarity 1, negatives 0.
  const std::size_t n = 4;
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  ad::Tape tape;
  const double loss =
      info_nce_loss(tape, ad::Tensor::from({n, n}, eye), ad::Tensor::from({n, n}, eye), 0.5).item();
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(loss, -std::log(e2 / (e2 + double(n - 1))), 1e-12);
}

TEST(InfoNceTest, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const std::size_t n = 10, d = 8;
  const auto a = testing::random_vector(n * d, 1.0, rng);
  const auto b = testing::random_vector(n * d, 1.0, rng);
  ad::Tape tape;
  const ad::Tensor z1 = ad::Tensor::from({n, d}, a, true);
  const ad::Tensor z2 = ad::Tensor::from({n, d}, b, true);
  tape.backward(info_nce_loss(tape, z1, z2, 0.5));
  auto f1 = [&](std::span<const double> x) {
    ad::Tape t;
    return info_nce_loss(t, ad::Tensor::from({n, d}, {x.begin(), x.end()}),
                         ad::Tensor::from({n, d}, b), 0.5).item();
  };
  auto f2 = [&](std::span<const double> x) {
    ad::Tape t;
    return info_nce_loss(t, ad::Tensor::from({n, d}, a),
                         ad::Tensor::from({n, d}, {x.begin(), x.end()}), 0.5).item();
  };
  const auto r1 = testing::check_gradient(f1, a, z1.grad(), 80, rng);
  const auto r2 = testing::check_gradient(f2, b, z2.grad(), 80, rng);
  EXPECT_GE(r1.checked + r2.checked, 100u);
  EXPECT_LE(r1.worst, 1e-4);
  EXPECT_LE(r2.worst, 1e-4);
}

// Pretext gradient w.r.t. encoder parameters; the augmentation / negative
// sampling stream is replayed from a copy for every evaluation.
void expect_pretext_gradient(PretrainObjective objective) {
  Rng rng(3);
  const auto graphs = testing::random_graphs(6, 5, 10, 0.35, 3, rng);
  const auto batch = pointers(graphs);
  const EncoderParams p = testing::small_encoder(3, 6, 2, 4);
  PretrainConfig cfg;
  cfg.objective = objective;
  const Rng stream(77);
  Rng r = stream;
  const LossAndGrad lg = pretext_loss_and_grad(p, batch, cfg, r);
  auto f = [&](std::span<const double> x) {
    EncoderParams q = p;
    q.assign(x);
    Rng s = stream;
    return pretext_loss_and_grad(q, batch, cfg, s).loss;
  };
  const auto res = testing::check_gradient(f, p.flatten(), lg.grad, 150, rng);
  EXPECT_GE(res.checked, 100u);
  EXPECT_LE(res.worst, 1e-4);
}

TEST(PretextTest, ContrastiveGradientMatchesFiniteDifferences) {
  expect_pretext_gradient(PretrainObjective::kContrastive);
}

TEST(PretextTest, EdgePredictionGradientMatchesFiniteDifferences) {
  expect_pretext_gradient(PretrainObjective::kEdgePred);
}

TEST(EdgePredTest, HandComputedSingleEdge) {
  // One-node-pair graph with its edge present: loss = -log sigmoid(<h0, h1>).
  const Graph g(2, {{0, 1}}, {1.0, 2.0}, 1);
  EncoderParams p;
  p.input_dim = 1;
  p.layers.push_back({Matrix(1, 1, {1.0}), {0.0}, Matrix(1, 1, {1.0}), {0.0}, 0.0});
  Rng rng(5);
  // States: 1 + 2 = 3 on both nodes; dot = 9. No absent pairs exist.
  const double expected = std::log1p(std::exp(-9.0));
  EXPECT_NEAR(edge_pred_loss(g, p, 1.0, rng), expected, 1e-12);
}

TEST(PretrainTest, ZeroEpochsReturnsInitialization) {
  const Dataset d = testing::small_dataset(20, 1);
  PretrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  cfg.arch.hidden_dim = 8;
  EXPECT_EQ(pretrain(d, cfg), initial_encoder(d, cfg));
}

TEST(PretrainTest, DeterministicPerSeed) {
  const Dataset d = testing::small_dataset(24, 2);
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.arch.hidden_dim = 8;
  cfg.seed = 5;
  std::vector<double> l1, l2;
  const EncoderParams a = pretrain(d, cfg, &l1);
  const EncoderParams b = pretrain(d, cfg, &l2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(l1.size(), 3u);
  cfg.seed = 6;
  EXPECT_NE(pretrain(d, cfg), a);
}

TEST(PretrainTest, NoOpHookReproducesPretraining) {
  const Dataset d = testing::small_dataset(24, 3);
  PretrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.arch.hidden_dim = 8;
  cfg.seed = 1;
  const EncoderParams hooked = train_encoder(
      d, cfg, initial_encoder(d, cfg),
      [](const EncoderParams&, std::vector<double>&, std::size_t) {});
  EXPECT_EQ(hooked, pretrain(d, cfg));
}

TEST(PretrainTest, RejectsInvalidConfig) {
  const Dataset d = testing::small_dataset(8, 4);
  PretrainConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(pretrain(d, cfg), Error);
  cfg = {};
  cfg.temperature = 0.0;
  EXPECT_THROW(pretrain(d, cfg), Error);
  EXPECT_THROW(pretrain(Dataset{}, PretrainConfig{}), Error);
}

TEST(PretrainTest, ContrastiveLinearProbeOnBenchmark) {
  BenchmarkSpec spec;
  Rng rng(8);
  const Dataset d = synth_benchmark(spec, rng);
  PretrainConfig cfg;
  cfg.seed = 8;
  const EncoderParams enc = pretrain(d, cfg);
  DownstreamConfig dcfg;
  dcfg.seed = 8;
  const SuspectModel m = train_downstream(enc, d, dcfg);
  ASSERT_TRUE(m.accuracy.has_value());
  EXPECT_GE(*m.accuracy, 0.85);
}

TEST(PretrainTest, EdgePredictionAucOnHeldOutGraphs) {
  BenchmarkSpec spec;
  Rng rng(9);
  const Dataset d = synth_benchmark(spec, rng);
  Dataset train, held_out;
  train.feature_dim = held_out.feature_dim = d.feature_dim;
  for (std::size_t i = 0; i < d.size(); ++i) {
    (i % 4 == 0 ? held_out : train).graphs.push_back(d.graphs[i]);
  }
  PretrainConfig cfg;
  cfg.objective = PretrainObjective::kEdgePred;
  cfg.seed = 9;
  const EncoderParams enc = pretrain(train, cfg);
  EXPECT_GE(edge_auc(held_out.graphs, enc), 0.8);
}

}  // namespace
}  // namespace pregip
