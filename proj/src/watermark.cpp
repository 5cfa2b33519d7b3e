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
#include "pregip/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pregip/log.hpp"
#include "pregip/optim.hpp"

namespace pregip {

const char* mode_name(InjectionMode m) {
  return m == InjectionMode::kPlain ? "plain" : "finetune_resistant";
}

InjectionMode mode_from_name(const std::string& name) {
  if (name == "plain") return InjectionMode::kPlain;
  if (name == "finetune_resistant") return InjectionMode::kFinetuneResistant;
  throw Error("unknown injection mode '" + name + "'");
}

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoMargin: return "no_margin";
    case Ablation::kRealGraphKeys: return "real_graph_keys";
    case Ablation::kNoFtr: return "no_ftr";
  }
  return "full";
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "full") return Ablation::kFull;
  if (name == "no_margin") return Ablation::kNoMargin;
  if (name == "real_graph_keys") return Ablation::kRealGraphKeys;
  if (name == "no_ftr") return Ablation::kNoFtr;
  throw Error("unknown ablation '" + name + "'");
}

void InjectionConfig::validate() const {
  if (!(lambda >= 0.0)) throw Error("injection.lambda: must be >= 0");
  if (!(epsilon >= 0.0)) throw Error("injection.epsilon: must be >= 0");
  if (inner_steps < 1) throw Error("injection.inner_steps: must be >= 1");
  if (!(margin > 0.0)) throw Error("injection.margin: must be > 0");
  if (neg_samples < 1) throw Error("injection.neg_samples: must be >= 1");
  if (base_node_count < 2) throw Error("injection.base_node_count: must be >= 2");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) {
    throw Error("injection.edge_prob: must lie in [0, 1]");
  }
  if (edge_prob_b && !(*edge_prob_b >= 0.0 && *edge_prob_b <= 1.0)) {
    throw Error("injection.edge_prob_b: must lie in [0, 1]");
  }
  pretrain.validate();
}

// ----------------------------------------------------------------- keys

WatermarkKey build_key(const InjectionConfig& cfg, const FeatureMoments& moments,
                       Rng& rng, const Dataset* real) {
  if (cfg.base_node_count < 2) {
    throw Error("build_key: base_node_count must be >= 2");
  }
  WatermarkKey key;
  key.edge_prob_a = cfg.edge_prob;
  key.edge_prob_b = cfg.edge_prob_b.value_or(cfg.edge_prob);
  key.base_node_count = cfg.base_node_count;
  key.node_count_delta = cfg.node_count_delta;
  key.moments = moments;
  key.seed = rng();
  Rng key_rng(key.seed);
  if (cfg.ablation == Ablation::kRealGraphKeys) {
    if (real == nullptr || real->size() < 2 * cfg.num_pairs) {
      throw Error("build_key: real-graph keys need at least " +
                  std::to_string(2 * cfg.num_pairs) + " pretraining graphs");
    }
    key.real_graphs = true;
    std::vector<std::size_t> order(real->size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), key_rng);
    for (std::size_t w = 0; w < cfg.num_pairs; ++w) {
      Graph a = real->graphs[order[2 * w]];
      Graph b = real->graphs[order[2 * w + 1]];
      a.set_label(std::nullopt);
      b.set_label(std::nullopt);
      a.set_id("wm" + std::to_string(w) + "a");
      b.set_id("wm" + std::to_string(w) + "b");
      key.pairs.emplace_back(std::move(a), std::move(b));
    }
    return key;
  }
  for (std::size_t w = 0; w < cfg.num_pairs; ++w) {
    Graph a = sample_er_graph(cfg.base_node_count, key.edge_prob_a, moments,
                              key_rng);
    Graph b = sample_er_graph(cfg.base_node_count + cfg.node_count_delta,
                              key.edge_prob_b, moments, key_rng);
    a.set_id("wm" + std::to_string(w) + "a");
    b.set_id("wm" + std::to_string(w) + "b");
    key.pairs.emplace_back(std::move(a), std::move(b));
  }
  return key;
}

// ---------------------------------------------------------- watermark loss

WatermarkInputs WatermarkInputs::build(const WatermarkKey& key,
                                       std::span<const Graph* const> real_batch,
                                       std::size_t feature_dim) {
  std::vector<const Graph*> graphs;
  graphs.reserve(2 * key.size() + real_batch.size());
  for (const auto& p : key.pairs) graphs.push_back(&p.first);
  for (const auto& p : key.pairs) graphs.push_back(&p.second);
  graphs.insert(graphs.end(), real_batch.begin(), real_batch.end());
  WatermarkInputs in;
  in.num_pairs = key.size();
  in.num_real = real_batch.size();
  in.batch = GraphBatch::build(graphs, feature_dim);
  return in;
}

ad::Tensor watermark_loss(ad::Tape& tape, const BoundEncoder& encoder,
                          const WatermarkInputs& inputs, double margin,
                          bool with_margin) {
  const std::size_t k = inputs.num_pairs;
  if (k == 0) {
    warn("watermark_loss: empty key, loss is 0");
    return ad::Tensor::scalar(0.0);
  }
  ad::Tensor h = graph_embeddings(tape, encoder, inputs.batch);
  std::vector<std::size_t> a_rows(k), b_rows(k);
  std::iota(a_rows.begin(), a_rows.end(), 0);
  std::iota(b_rows.begin(), b_rows.end(), k);
  ad::Tensor pair_term = ad::sum(
      tape, ad::row_sq_norm(tape, ad::sub(tape, ad::gather_rows(tape, h, a_rows),
                                          ad::gather_rows(tape, h, b_rows))));
  if (!with_margin || inputs.num_real == 0) return pair_term;
  // Every (watermark graph, real graph) combination.
  const std::size_t q = inputs.num_real;
  std::vector<std::size_t> wm_rows, real_rows;
  wm_rows.reserve(2 * k * q);
  real_rows.reserve(2 * k * q);
  for (std::size_t w = 0; w < 2 * k; ++w) {
    for (std::size_t i = 0; i < q; ++i) {
      wm_rows.push_back(w);
      real_rows.push_back(2 * k + i);
    }
  }
  ad::Tensor dist = ad::row_sq_norm(
      tape, ad::sub(tape, ad::gather_rows(tape, h, std::move(wm_rows)),
                    ad::gather_rows(tape, h, std::move(real_rows))));
  ad::Tensor hinge =
      ad::relu(tape, ad::add_scalar(tape, ad::scale(tape, dist, -1.0), margin));
  return ad::add(tape, pair_term, ad::sum(tape, hinge));
}

double watermark_loss(const EncoderParams& params, const WatermarkKey& key,
                      std::span<const Graph* const> real_batch, double margin,
                      bool with_margin) {
  const WatermarkInputs inputs =
      WatermarkInputs::build(key, real_batch, params.input_dim);
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(params, false);
  return watermark_loss(tape, bound, inputs, margin, with_margin).item();
}

LossAndGrad watermark_loss_and_grad(const EncoderParams& params,
                                    const WatermarkInputs& inputs,
                                    double margin, bool with_margin,
                                    std::span<const double> shift) {
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(params, true, shift);
  ad::Tensor loss = watermark_loss(tape, bound, inputs, margin, with_margin);
  LossAndGrad out;
  out.loss = loss.item();
  tape.backward(loss);
  out.grad = collect_grad(bound);
  return out;
}

// ------------------------------------------------------------ inner ascent

InnerAscent inner_ascent(const GradientAt& gradient, std::size_t dim,
                         double eps, std::size_t steps) {
  if (!(eps >= 0.0)) throw Error("inner_ascent: eps must be >= 0");
  if (steps < 1) throw Error("inner_ascent: steps must be >= 1");
  InnerAscent out;
  std::vector<double> delta(dim, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    LossAndGrad eval = gradient(delta);
    if (eval.grad.size() != dim) throw Error("inner_ascent: gradient size");
    const double alpha =
        eps / (double(steps) * std::max(l2_norm(eval.grad), 1.0));
    for (std::size_t i = 0; i < dim; ++i) delta[i] += alpha * eval.grad[i];
    double norm = l2_norm(delta);
    if (norm > eps) {
      const double shrink = eps / norm;
      for (double& d : delta) d *= shrink;
      norm = l2_norm(delta);
    }
    if (norm > eps + 1e-9) {
      throw Error("inner_ascent: perturbation left the eps-ball");
    }
    out.evaluations.push_back(std::move(eval));
    out.deltas.push_back(delta);
    out.delta_norms.push_back(norm);
  }
  return out;
}

InnerAscent inner_ascent(const EncoderParams& params,
                         const WatermarkInputs& inputs, double margin,
                         bool with_margin, double eps, std::size_t steps) {
  return inner_ascent(
      [&](std::span<const double> delta) {
        return watermark_loss_and_grad(params, inputs, margin, with_margin,
                                       delta);
      },
      params.num_parameters(), eps, steps);
}

std::vector<double> outer_gradient(
    const EncoderParams& params, std::span<const Graph* const> pretext_batch,
    const PretrainConfig& pretrain_cfg, Rng& pretext_rng,
    const WatermarkInputs& inputs, double margin, bool with_margin,
    double lambda, const std::vector<std::vector<double>>& deltas) {
  std::vector<double> grad =
      pretext_loss_and_grad(params, pretext_batch, pretrain_cfg, pretext_rng)
          .grad;
  for (const auto& delta : deltas) {
    const LossAndGrad wm =
        watermark_loss_and_grad(params, inputs, margin, with_margin, delta);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lambda * wm.grad[i];
  }
  return grad;
}

// --------------------------------------------------------------- injection

InjectionResult inject_with_key(const Dataset& dataset,
                                const InjectionConfig& cfg, WatermarkKey key,
                                EncoderParams init, Rng& rng) {
  cfg.validate();
  if (dataset.empty()) throw Error("inject: dataset is empty");
  for (const auto& [a, b] : key.pairs) {
    if (a.feature_dim() != dataset.feature_dim ||
        b.feature_dim() != dataset.feature_dim) {
      throw Error("inject: key feature_dim differs from dataset");
    }
  }
  InjectionResult result;
  const bool ftr = cfg.finetune_resistant();
  const bool with_margin = cfg.uses_margin();
  const std::size_t steps = cfg.inner_steps;
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

  std::vector<double> wm_sum, delta_max;
  std::vector<std::size_t> wm_count;

  GradientHook hook = [&](const EncoderParams& theta, std::vector<double>& grad,
                          std::size_t epoch) {
    std::vector<const Graph*> real;
    real.reserve(cfg.neg_samples);
    for (std::size_t i = 0; i < cfg.neg_samples; ++i)
      real.push_back(&dataset.graphs[pick(rng)]);
    const WatermarkInputs inputs =
        WatermarkInputs::build(key, real, dataset.feature_dim);
    if (wm_sum.size() <= epoch) {
      wm_sum.resize(epoch + 1, 0.0);
      delta_max.resize(epoch + 1, 0.0);
      wm_count.resize(epoch + 1, 0);
    }
    double loss_at_theta = 0.0;
    std::vector<double> wm_grad;
    if (!ftr) {
      LossAndGrad lg =
          watermark_loss_and_grad(theta, inputs, cfg.margin, with_margin);
      loss_at_theta = lg.loss;
      wm_grad = std::move(lg.grad);
    } else {
      InnerAscent ascent = inner_ascent(theta, inputs, cfg.margin, with_margin,
                                        cfg.epsilon, steps);
      result.inner_steps_run += steps;
      for (double n : ascent.delta_norms) {
        delta_max[epoch] = std::max(delta_max[epoch], n);
        result.max_delta_norm = std::max(result.max_delta_norm, n);
      }
      loss_at_theta = ascent.evaluations.front().loss;
      // grad L_W(theta + delta_t) for t = 1..T; the inner loop already
      // evaluated delta_1..delta_{T-1}.
      wm_grad.assign(grad.size(), 0.0);
      for (std::size_t t = 1; t <= steps; ++t) {
        const std::vector<double> g =
            t < steps ? std::move(ascent.evaluations[t].grad)
                      : watermark_loss_and_grad(theta, inputs, cfg.margin,
                                                with_margin, ascent.deltas.back())
                            .grad;
        for (std::size_t i = 0; i < g.size(); ++i) wm_grad[i] += g[i];
      }
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad[i] += cfg.lambda * wm_grad[i];
    wm_sum[epoch] += loss_at_theta;
    ++wm_count[epoch];
  };

  std::vector<double> pre_losses;
  result.encoder =
      train_encoder(dataset, cfg.pretrain, std::move(init), hook, &pre_losses);
  for (std::size_t e = 0; e < pre_losses.size(); ++e) {
    InjectionEpoch log;
    log.epoch = e;
    log.pretrain_loss = pre_losses[e];
    if (e < wm_sum.size() && wm_count[e] > 0) {
      log.watermark_loss = wm_sum[e] / double(wm_count[e]);
      log.max_delta_norm = delta_max[e];
    }
    result.log.push_back(log);
  }
  result.key = std::move(key);
  return result;
}

InjectionResult inject(const Dataset& dataset, const InjectionConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  if (dataset.empty()) throw Error("inject: dataset is empty");
  WatermarkKey key = build_key(cfg, feature_moments(dataset), rng, &dataset);
  return inject_with_key(dataset, cfg, std::move(key),
                         initial_encoder(dataset, cfg.pretrain), rng);
}

// ---------------------------------------------------------------- key file

void save_key(const WatermarkKey& key, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  nlohmann::json header = {{"kind", "watermark_key"},
                           {"num_pairs", key.size()},
                           {"p_a", key.edge_prob_a},
                           {"p_b", key.edge_prob_b},
                           {"base_node_count", key.base_node_count},
                           {"node_count_delta", key.node_count_delta},
                           {"seed", key.seed},
                           {"real_graphs", key.real_graphs},
                           {"mu", key.moments.mu},
                           {"sigma", key.moments.sigma}};
  out << header.dump() << '\n';
  for (std::size_t w = 0; w < key.size(); ++w) {
    for (int side = 0; side < 2; ++side) {
      const Graph& g = side == 0 ? key.pairs[w].first : key.pairs[w].second;
      nlohmann::json record = graph_to_json(g);
      record["pair"] = w;
      record["role"] = side == 0 ? "a" : "b";
      out << record.dump() << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

WatermarkKey load_key(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open key file " + path.string());
  std::string text;
  std::size_t line = 0;
  WatermarkKey key;
  std::size_t expected = 0;
  std::vector<std::optional<Graph>> a_side, b_side;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error("line " + std::to_string(line) + ": " + e.what());
    }
    try {
      if (line == 1) {
        if (j.value("kind", "") != "watermark_key") {
          throw Error("missing watermark_key header");
        }
        expected = j.at("num_pairs").get<std::size_t>();
        key.edge_prob_a = j.at("p_a").get<double>();
        key.edge_prob_b = j.at("p_b").get<double>();
        key.base_node_count = j.at("base_node_count").get<std::size_t>();
        key.node_count_delta = j.at("node_count_delta").get<std::size_t>();
        key.seed = j.at("seed").get<std::uint64_t>();
        key.real_graphs = j.value("real_graphs", false);
        key.moments.mu = j.at("mu").get<std::vector<double>>();
        key.moments.sigma = j.at("sigma").get<std::vector<double>>();
        a_side.resize(expected);
        b_side.resize(expected);
        continue;
      }
      const auto w = j.at("pair").get<std::size_t>();
      const auto role = j.at("role").get<std::string>();
      if (w >= expected) throw Error("pair index out of range");
      if (role != "a" && role != "b") throw Error("role must be a or b");
      auto& slot = role == "a" ? a_side[w] : b_side[w];
      if (slot) throw Error("duplicate graph for pair " + std::to_string(w));
      slot = graph_from_json(j, line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("line " + std::to_string(line) + ": " + e.what());
    } catch (const Error& e) {
      const std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw;
      throw Error("line " + std::to_string(line) + ": " + what);
    }
  }
  if (line == 0) throw Error(path.string() + ": empty key file");
  for (std::size_t w = 0; w < expected; ++w) {
    if (!a_side[w] || !b_side[w]) {
      throw Error(path.string() + ": pair " + std::to_string(w) + " incomplete");
    }
    key.pairs.emplace_back(std::move(*a_side[w]), std::move(*b_side[w]));
  }
  return key;
}

}  // namespace pregip
