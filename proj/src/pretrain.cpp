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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pregip/log.hpp"
#include "pregip/optim.hpp"

namespace pregip {

const char* objective_name(PretrainObjective o) {
  return o == PretrainObjective::kContrastive ? "contrastive" : "edge_pred";
}

PretrainObjective objective_from_name(const std::string& name) {
  if (name == "contrastive") return PretrainObjective::kContrastive;
  if (name == "edge_pred") return PretrainObjective::kEdgePred;
  throw Error("unknown pretraining objective '" + name + "'");
}

void PretrainConfig::validate() const {
  if (objective == PretrainObjective::kContrastive && batch_size < 2) {
    throw Error("pretrain.batch_size: contrastive objective needs >= 2");
  }
  if (batch_size < 1) throw Error("pretrain.batch_size: must be >= 1");
  if (!(temperature > 0.0)) throw Error("pretrain.temperature: must be > 0");
  if (!(learning_rate > 0.0)) throw Error("pretrain.learning_rate: must be > 0");
  if (!(negative_edge_ratio >= 0.0)) {
    throw Error("pretrain.negative_edge_ratio: must be >= 0");
  }
  if (!(augment_ratio >= 0.0 && augment_ratio < 1.0)) {
    throw Error("pretrain.augment_ratio: must lie in [0, 1)");
  }
}

// ------------------------------------------------------------------ InfoNCE

ad::Tensor info_nce_loss(ad::Tape& tape, const ad::Tensor& z1,
                         const ad::Tensor& z2, double tau) {
  if (z1.rank() != 2 || z1.shape() != z2.shape()) {
    throw Error("info_nce_loss: batches differ in shape " +
                ad::shape_string(z1.shape()) + " vs " +
                ad::shape_string(z2.shape()));
  }
  if (z1.rows() < 2) throw Error("info_nce_loss: batch size must be >= 2");
  if (!(tau > 0.0)) throw Error("info_nce_loss: temperature must be > 0");
  ad::Tensor a = ad::row_normalize(tape, z1);
  ad::Tensor b = ad::row_normalize(tape, z2);
  ad::Tensor sim = ad::scale(tape, ad::matmul(tape, a, ad::transpose(tape, b)),
                             1.0 / tau);
  std::vector<std::size_t> labels(z1.rows());
  std::iota(labels.begin(), labels.end(), 0);
  return ad::softmax_cross_entropy(tape, sim, std::move(labels));
}

double info_nce_loss(const std::vector<Embedding>& z1,
                     const std::vector<Embedding>& z2, double tau) {
  if (z1.empty() || z1.size() != z2.size()) {
    throw Error("info_nce_loss: batches differ in length");
  }
  auto stack = [](const std::vector<Embedding>& z) {
    std::vector<double> flat;
    for (const auto& row : z) {
      if (row.size() != z.front().size()) throw Error("info_nce_loss: ragged batch");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return ad::Tensor::from({z.size(), z.front().size()}, std::move(flat));
  };
  ad::Tape tape;
  return info_nce_loss(tape, stack(z1), stack(z2), tau).item();
}

// ---------------------------------------------------------- edge prediction

namespace {

struct EdgeSamples {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> labels;
};

EdgeSamples sample_edge_pairs(std::span<const Graph* const> graphs,
                              double neg_ratio, Rng& rng) {
  EdgeSamples s;
  std::size_t base = 0;
  for (const Graph* g : graphs) {
    for (const auto& [u, v] : g->edges()) {
      s.pairs.emplace_back(base + u, base + v);
      s.labels.push_back(1.0);
    }
    const std::size_t want = static_cast<std::size_t>(
        std::ceil(neg_ratio * double(g->num_edges())));
    const std::size_t n = g->num_nodes();
    const std::size_t absent = n * (n - (n > 0 ? 1 : 0)) / 2 - g->num_edges();
    if (want > 0 && absent == 0) {
      warn("edge_pred_loss: complete graph has no negative pairs");
    }
    if (want > 0 && absent > 0) {
      std::vector<Edge> candidates;
      candidates.reserve(absent);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
          if (!g->has_edge(u, v)) candidates.emplace_back(u, v);
      std::shuffle(candidates.begin(), candidates.end(), rng);
      const std::size_t take = std::min(want, candidates.size());
      for (std::size_t i = 0; i < take; ++i) {
        s.pairs.emplace_back(base + candidates[i].first,
                             base + candidates[i].second);
        s.labels.push_back(0.0);
      }
    }
    base += n;
  }
  return s;
}

}  // namespace

ad::Tensor edge_pred_loss(ad::Tape& tape, const BoundEncoder& encoder,
                          std::span<const Graph* const> graphs,
                          double neg_ratio, Rng& rng) {
  EdgeSamples samples = sample_edge_pairs(graphs, neg_ratio, rng);
  if (samples.pairs.empty()) return ad::Tensor::scalar(0.0);
  const GraphBatch batch = GraphBatch::build(graphs, encoder.params->input_dim);
  ad::Tensor h = node_states(tape, encoder, batch);
  ad::Tensor scores = ad::pair_dot(tape, h, std::move(samples.pairs));
  return ad::bce_with_logits(tape, scores, std::move(samples.labels));
}

double edge_pred_loss(const Graph& g, const EncoderParams& params,
                      double neg_ratio, Rng& rng) {
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(params, false);
  const Graph* ptr = &g;
  return edge_pred_loss(tape, bound, std::span<const Graph* const>(&ptr, 1),
                        neg_ratio, rng)
      .item();
}

double edge_auc(std::span<const Graph> graphs, const EncoderParams& params) {
  std::vector<double> pos, neg;
  for (const Graph& g : graphs) {
    ad::Tape tape;
    const BoundEncoder bound = bind_encoder(params, false);
    const Graph* ptr = &g;
    const GraphBatch batch =
        GraphBatch::build(std::span<const Graph* const>(&ptr, 1), params.input_dim);
    const ad::Tensor h = node_states(tape, bound, batch);
    const std::size_t m = h.cols();
    for (std::size_t u = 0; u < g.num_nodes(); ++u) {
      for (std::size_t v = u + 1; v < g.num_nodes(); ++v) {
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) dot += h.at(u, j) * h.at(v, j);
        (g.has_edge(u, v) ? pos : neg).push_back(dot);
      }
    }
  }
  if (pos.empty() || neg.empty()) throw Error("edge_auc: need edges and non-edges");
  // Rank-based AUC with midranks for ties.
  std::vector<std::pair<double, int>> all;
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * double(i + j + 1);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 1) rank_sum += mid;
    i = j;
  }
  const double np = double(pos.size()), nn = double(neg.size());
  return (rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

// ----------------------------------------------------------- training loop

LossAndGrad pretext_loss_and_grad(const EncoderParams& params,
                                  std::span<const Graph* const> batch,
                                  const PretrainConfig& cfg, Rng& rng) {
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(params, true);
  ad::Tensor loss;
  if (cfg.objective == PretrainObjective::kContrastive) {
    std::vector<Graph> view1, view2;
    view1.reserve(batch.size());
    view2.reserve(batch.size());
    for (const Graph* g : batch) {
      view1.push_back(augment(*g, Augmentation::kNodeDrop, cfg.augment_ratio, rng));
      view2.push_back(augment(*g, Augmentation::kEdgePerturb, cfg.augment_ratio, rng));
    }
    const GraphBatch b1 = GraphBatch::build(view1, params.input_dim);
    const GraphBatch b2 = GraphBatch::build(view2, params.input_dim);
    ad::Tensor z1 = graph_embeddings(tape, bound, b1);
    ad::Tensor z2 = graph_embeddings(tape, bound, b2);
    loss = info_nce_loss(tape, z1, z2, cfg.temperature);
  } else {
    loss = edge_pred_loss(tape, bound, batch, cfg.negative_edge_ratio, rng);
  }
  LossAndGrad out;
  out.loss = loss.item();
  tape.backward(loss);
  out.grad = collect_grad(bound);
  return out;
}

EncoderParams initial_encoder(const Dataset& dataset, const PretrainConfig& cfg) {
  EncoderArch arch = cfg.arch;
  arch.input_dim = dataset.feature_dim;
  Rng rng = make_rng(cfg.seed, Stream::kInit);
  return init_encoder(arch, rng);
}

EncoderParams train_encoder(const Dataset& dataset, const PretrainConfig& cfg,
                            EncoderParams params, const GradientHook& hook,
                            std::vector<double>* epoch_losses) {
  cfg.validate();
  if (dataset.empty()) throw Error("pretrain: dataset is empty");
  const std::size_t min_batch =
      cfg.objective == PretrainObjective::kContrastive ? 2 : 1;
  Rng rng = make_rng(cfg.seed, Stream::kBatches);
  Adam adam(params.num_parameters(), cfg.learning_rate);
  std::vector<double> flat = params.flatten();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < min_batch) continue;
      std::vector<const Graph*> batch;
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(&dataset.graphs[order[i]]);
      LossAndGrad lg = pretext_loss_and_grad(params, batch, cfg, rng);
      if (hook) hook(params, lg.grad, epoch);
      adam.step(flat, lg.grad);
      params.assign(flat);
      loss_sum += lg.loss;
      ++batches;
    }
    if (epoch_losses) {
      epoch_losses->push_back(batches ? loss_sum / double(batches) : 0.0);
    }
  }
  return params;
}

EncoderParams pretrain(const Dataset& dataset, const PretrainConfig& cfg,
                       std::vector<double>* epoch_losses) {
  if (dataset.empty()) throw Error("pretrain: dataset is empty");
  return train_encoder(dataset, cfg, initial_encoder(dataset, cfg), nullptr,
                       epoch_losses);
}

}  // namespace pregip
