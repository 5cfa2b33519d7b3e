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
#ifndef PREGIP_PRETRAIN_HPP_
#define PREGIP_PRETRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pregip/autodiff.hpp"
#include "pregip/encoder.hpp"
#include "pregip/graphs.hpp"

namespace pregip {

enum class PretrainObjective { kContrastive, kEdgePred };

const char* objective_name(PretrainObjective o);
PretrainObjective objective_from_name(const std::string& name);

struct PretrainConfig {
  PretrainObjective objective = PretrainObjective::kContrastive;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;  // Q in the contrastive objective
  double learning_rate = 1e-3;
  double temperature = 0.5;
  double negative_edge_ratio = 1.0;
  double augment_ratio = 0.2;
  std::uint64_t seed = 0;
  // input_dim is taken from the dataset.
  EncoderArch arch;

  void validate() const;
};

// Mean over rows i of -log(exp(s_ii / tau) / sum_j exp(s_ij / tau)) where s is
// the cosine similarity between z1 rows and z2 rows. Zero-norm rows have
// similarity 0 to everything.
ad::Tensor info_nce_loss(ad::Tape& tape, const ad::Tensor& z1,
                         const ad::Tensor& z2, double tau);
double info_nce_loss(const std::vector<Embedding>& z1,
                     const std::vector<Embedding>& z2, double tau);

// Binary cross-entropy on node-state inner products: every edge is a
// positive, ceil(neg_ratio * |E|) absent pairs per graph are negatives.
// Graphs without absent pairs contribute positives only.
ad::Tensor edge_pred_loss(ad::Tape& tape, const BoundEncoder& encoder,
                          std::span<const Graph* const> graphs,
                          double neg_ratio, Rng& rng);
double edge_pred_loss(const Graph& g, const EncoderParams& params,
                      double neg_ratio, Rng& rng);

// Exact AUC of node-state inner products, edges vs. all absent pairs.
double edge_auc(std::span<const Graph> graphs, const EncoderParams& params);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Pretext loss of one batch and its gradient w.r.t. every encoder parameter.
// Consumes `rng` for augmentations / negative sampling.
LossAndGrad pretext_loss_and_grad(const EncoderParams& params,
                                  std::span<const Graph* const> batch,
                                  const PretrainConfig& cfg, Rng& rng);

// Called once per optimizer step with the current parameters, the pretext
// gradient and the 0-based epoch; may add further terms to the gradient.
using GradientHook = std::function<void(
    const EncoderParams& params, std::vector<double>& grad, std::size_t epoch)>;

// Mini-batch Adam loop shared by plain pretraining and watermark injection.
// Batch order and augmentations come from cfg.seed's batch stream, so two
// runs with the same config differ only through what the hook adds.
EncoderParams train_encoder(const Dataset& dataset, const PretrainConfig& cfg,
                            EncoderParams init, const GradientHook& hook,
                            std::vector<double>* epoch_losses = nullptr);

// The initialization every run with this config starts from.
EncoderParams initial_encoder(const Dataset& dataset, const PretrainConfig& cfg);

// Plain, non-watermarked pretraining.
EncoderParams pretrain(const Dataset& dataset, const PretrainConfig& cfg,
                       std::vector<double>* epoch_losses = nullptr);

}  // namespace pregip

#endif  // PREGIP_PRETRAIN_HPP_
