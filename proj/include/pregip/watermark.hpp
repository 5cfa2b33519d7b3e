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
#ifndef PREGIP_WATERMARK_HPP_
#define PREGIP_WATERMARK_HPP_

// Task-free watermark injection into a pretrained GIN encoder.
//
// A watermark key is a list of graph pairs (a, b) that the owner wants the
// encoder to embed close together while keeping both far from real data:
//
//   L_W(theta) = sum_pairs ||h_a - h_b||^2
//              + sum_{k in {a,b}} sum_{i=1..Q} max(0, m - ||h_k - h_i||^2)
//
// Injection minimizes L_pre + lambda * L_W. The finetuning-resistant mode
// instead minimizes L_pre + lambda * max_{||delta|| <= eps} L_W(theta + delta),
// approximating the inner max by T normalized ascent steps and the outer
// gradient by sum_t grad L_W(theta + delta_t) with delta_t held constant.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pregip/encoder.hpp"
#include "pregip/graphs.hpp"
#include "pregip/pretrain.hpp"

namespace pregip {

enum class InjectionMode { kPlain, kFinetuneResistant };

enum class Ablation {
  kFull,
  kNoMargin,       // drop the hinge term of L_W
  kRealGraphKeys,  // key pairs drawn from the pretraining set
  kNoFtr,          // plain objective, no inner ascent
};

const char* mode_name(InjectionMode m);
InjectionMode mode_from_name(const std::string& name);
const char* ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct WatermarkKey {
  std::vector<std::pair<Graph, Graph>> pairs;
  // Generation metadata.
  double edge_prob_a = 0.2;
  double edge_prob_b = 0.2;
  std::size_t base_node_count = 15;
  std::size_t node_count_delta = 15;
  std::uint64_t seed = 0;
  bool real_graphs = false;
  FeatureMoments moments;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct InjectionConfig {
  std::size_t num_pairs = 20;
  double lambda = 0.1;
  double epsilon = 2.0;
  std::size_t inner_steps = 3;  // T
  double margin = 1.0;          // m
  std::size_t neg_samples = 32; // Q
  InjectionMode mode = InjectionMode::kFinetuneResistant;
  Ablation ablation = Ablation::kFull;
  std::size_t base_node_count = 15;
  std::size_t node_count_delta = 15;
  double edge_prob = 0.2;
  // Edge probability of the larger graph in each pair; defaults to edge_prob.
  std::optional<double> edge_prob_b;
  PretrainConfig pretrain;

  void validate() const;
  bool uses_margin() const { return ablation != Ablation::kNoMargin; }
  // Inner ascent runs only in finetune-resistant mode with a non-trivial
  // ball; eps = 0 makes the ball a point and the objective the plain one.
  bool finetune_resistant() const {
    return mode == InjectionMode::kFinetuneResistant &&
           ablation != Ablation::kNoFtr && epsilon > 0.0;
  }
};

// Synthetic pairs: graph a has base_node_count nodes, graph b has
// base_node_count + node_count_delta, each ER(p) with N(mu, sigma^2) node
// features. With Ablation::kRealGraphKeys, pairs are distinct graphs drawn
// uniformly from `real` (labels stripped).
WatermarkKey build_key(const InjectionConfig& cfg, const FeatureMoments& moments,
                       Rng& rng, const Dataset* real = nullptr);

// Key graphs and one real batch, laid out once and reused for every L_W
// evaluation of an outer iteration. Rows: a_0..a_{K-1}, b_0..b_{K-1}, real.
struct WatermarkInputs {
  GraphBatch batch;
  std::size_t num_pairs = 0;
  std::size_t num_real = 0;

  static WatermarkInputs build(const WatermarkKey& key,
                               std::span<const Graph* const> real_batch,
                               std::size_t feature_dim);
};

ad::Tensor watermark_loss(ad::Tape& tape, const BoundEncoder& encoder,
                          const WatermarkInputs& inputs, double margin,
                          bool with_margin = true);
double watermark_loss(const EncoderParams& params, const WatermarkKey& key,
                      std::span<const Graph* const> real_batch, double margin,
                      bool with_margin = true);
// L_W and its gradient at theta + shift (shift may be empty).
LossAndGrad watermark_loss_and_grad(const EncoderParams& params,
                                    const WatermarkInputs& inputs,
                                    double margin, bool with_margin,
                                    std::span<const double> shift = {});

using GradientAt =
    std::function<LossAndGrad(std::span<const double> delta)>;

struct InnerAscent {
  // deltas[t] is delta_{t+1}; every entry satisfies ||delta|| <= eps.
  std::vector<std::vector<double>> deltas;
  std::vector<double> delta_norms;
  // L_W and its gradient at delta_0 .. delta_{T-1}.
  std::vector<LossAndGrad> evaluations;
};

// delta_{t+1} = delta_t + alpha * g_t with g_t = grad L_W(theta + delta_t),
// alpha = eps / (T * max(||g_t||, 1)), followed by projection onto the
// eps-ball. delta_0 = 0.
InnerAscent inner_ascent(const GradientAt& gradient, std::size_t dim,
                         double eps, std::size_t steps);
InnerAscent inner_ascent(const EncoderParams& params,
                         const WatermarkInputs& inputs, double margin,
                         bool with_margin, double eps, std::size_t steps);

// grad L_pre(theta) on `pretext_batch` + lambda * sum_t grad L_W(theta +
// delta_t), with no differentiation through delta_t.
std::vector<double> outer_gradient(
    const EncoderParams& params, std::span<const Graph* const> pretext_batch,
    const PretrainConfig& pretrain_cfg, Rng& pretext_rng,
    const WatermarkInputs& inputs, double margin, bool with_margin,
    double lambda, const std::vector<std::vector<double>>& deltas);

struct InjectionEpoch {
  std::size_t epoch = 0;
  double pretrain_loss = 0.0;
  double watermark_loss = 0.0;  // mean L_W at theta over the epoch's steps
  double max_delta_norm = 0.0;
};

struct InjectionResult {
  EncoderParams encoder;
  WatermarkKey key;
  std::vector<InjectionEpoch> log;
  double max_delta_norm = 0.0;   // over every inner step of the run
  std::size_t inner_steps_run = 0;
};

// Builds the key from `rng`, then runs injection from the pretraining
// initialization of cfg.pretrain.
InjectionResult inject(const Dataset& dataset, const InjectionConfig& cfg,
                       Rng& rng);
// Injection with a given key and starting point. `rng` drives the real-batch
// sampling; the pretext stream comes from cfg.pretrain.seed.
InjectionResult inject_with_key(const Dataset& dataset,
                                const InjectionConfig& cfg, WatermarkKey key,
                                EncoderParams init, Rng& rng);

// Key file: a metadata header line, then one graph record per line carrying
// "pair" and "role" ("a"/"b").
void save_key(const WatermarkKey& key, const std::filesystem::path& path);
WatermarkKey load_key(const std::filesystem::path& path);

}  // namespace pregip

#endif  // PREGIP_WATERMARK_HPP_
