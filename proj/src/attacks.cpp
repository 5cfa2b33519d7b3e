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
#include "pregip/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "pregip/optim.hpp"

namespace pregip {

const char* scenario_name(Scenario s) {
  return s == Scenario::kFix ? "fix" : "finetune";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "fix") return Scenario::kFix;
  if (name == "finetune") return Scenario::kFinetune;
  throw Error("unknown scenario '" + name + "'");
}

const char* attack_name(AttackKind a) {
  switch (a) {
    case AttackKind::kNone: return "none";
    case AttackKind::kPrune: return "prune";
    case AttackKind::kOverwrite: return "overwrite";
    case AttackKind::kFinetuneThenPrune: return "finetune_prune";
  }
  return "none";
}

AttackKind attack_from_name(const std::string& name) {
  if (name == "none") return AttackKind::kNone;
  if (name == "prune") return AttackKind::kPrune;
  if (name == "overwrite") return AttackKind::kOverwrite;
  if (name == "finetune_prune") return AttackKind::kFinetuneThenPrune;
  throw Error("unknown attack '" + name + "'");
}

void DownstreamConfig::validate() const {
  if (!(label_rate > 0.0 && label_rate <= 1.0)) {
    throw Error("downstream.label_rate: must lie in (0, 1]");
  }
  if (!(learning_rate > 0.0)) throw Error("downstream.learning_rate: must be > 0");
  if (!(encoder_learning_rate > 0.0)) {
    throw Error("downstream.encoder_learning_rate: must be > 0");
  }
  if (batch_size < 1) throw Error("downstream.batch_size: must be >= 1");
  if (head.depth < 1) throw Error("downstream.head.depth: must be >= 1");
  if (head.depth > 1 && head.hidden_dim < 1) {
    throw Error("downstream.head.hidden_dim: must be >= 1");
  }
}

void AttackSchedule::validate() const {
  if (!(prune_rate >= 0.0 && prune_rate <= 1.0)) {
    throw Error("attack.prune_rate: must lie in [0, 1]");
  }
  if (kind == AttackKind::kOverwrite) adversary.validate();
}

void ZooSpec::validate() const {
  if (n_piracy < 1) throw Error("zoo.n_piracy: must be >= 1");
  if (n_independent < 1) throw Error("zoo.n_independent: must be >= 1");
  if (jobs < 1) throw Error("zoo.jobs: must be >= 1");
  downstream.validate();
  attack.validate();
  independent_pretrain.validate();
}

// ------------------------------------------------------------- downstream

Split split_dataset(std::size_t n, double label_rate, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  const auto train = static_cast<std::size_t>(std::llround(label_rate * double(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + std::min(train, n));
  s.test.assign(order.begin() + std::min(train, n), order.end());
  return s;
}

double accuracy(const SuspectModel& model, const Dataset& data,
                std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error("accuracy: no graphs");
  std::vector<const Graph*> graphs;
  for (std::size_t i : indices) graphs.push_back(&data.graphs[i]);
  const std::vector<std::size_t> pred = predict_classes(model, graphs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& y = graphs[i]->label();
    if (!y) throw Error("accuracy: graph '" + graphs[i]->id() + "' is unlabeled");
    hits += pred[i] == static_cast<std::size_t>(*y) ? 1 : 0;
  }
  return double(hits) / double(pred.size());
}

SuspectModel train_downstream(const EncoderParams& encoder, const Dataset& data,
                              const DownstreamConfig& cfg) {
  cfg.validate();
  if (!data.num_classes) throw Error("downstream: dataset is unlabeled");
  const Split split = split_dataset(data.size(), cfg.label_rate, cfg.seed);
  if (split.train.empty()) throw Error("downstream: no labeled graphs after split");
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i : split.train) {
    const auto& y = data.graphs[i].label();
    if (!y) throw Error("downstream: graph '" + data.graphs[i].id() + "' is unlabeled");
    labels[i] = static_cast<std::size_t>(*y);
  }

  SuspectModel model;
  model.encoder = encoder;
  Rng head_rng = make_rng(cfg.seed, Stream::kHead);
  model.head = init_classifier(encoder.output_dim(), *data.num_classes, cfg.head,
                               head_rng);
  Rng batch_rng = make_rng(cfg.seed, Stream::kBatches);
  Adam head_opt(model.head.num_parameters(), cfg.learning_rate);
  std::vector<double> head_flat = model.head.flatten();
  const bool finetune = cfg.scenario == Scenario::kFinetune;
  Adam enc_opt(finetune ? encoder.num_parameters() : 0, cfg.encoder_learning_rate);
  std::vector<double> enc_flat = finetune ? encoder.flatten() : std::vector<double>{};

  // Frozen encoder: embed the training graphs once.
  ad::Tensor frozen;
  std::vector<std::size_t> row_of(data.size());
  if (!finetune && cfg.epochs > 0) {
    std::vector<const Graph*> graphs;
    for (std::size_t r = 0; r < split.train.size(); ++r) {
      graphs.push_back(&data.graphs[split.train[r]]);
      row_of[split.train[r]] = r;
    }
    ad::Tape tape;
    const BoundEncoder bound = bind_encoder(model.encoder, false);
    frozen = graph_embeddings(tape, bound, GraphBatch::build(graphs, encoder.input_dim));
  }

  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), batch_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> y;
      for (std::size_t i = start; i < end; ++i) y.push_back(labels[order[i]]);
      ad::Tape tape;
      const BoundClassifier head = bind_classifier(model.head, true);
      ad::Tensor emb;
      BoundEncoder bound;
      if (finetune) {
        std::vector<const Graph*> graphs;
        for (std::size_t i = start; i < end; ++i) graphs.push_back(&data.graphs[order[i]]);
        bound = bind_encoder(model.encoder, true);
        emb = graph_embeddings(tape, bound, GraphBatch::build(graphs, encoder.input_dim));
      } else {
        std::vector<std::size_t> rows;
        for (std::size_t i = start; i < end; ++i) rows.push_back(row_of[order[i]]);
        emb = ad::gather_rows(tape, frozen, std::move(rows));
      }
      ad::Tensor loss = ad::softmax_cross_entropy(
          tape, classifier_logits(tape, head, emb), std::move(y));
      tape.backward(loss);
      head_opt.step(head_flat, collect_grad(head));
      model.head.assign(head_flat);
      if (finetune) {
        enc_opt.step(enc_flat, collect_grad(bound));
        model.encoder.assign(enc_flat);
      }
    }
  }
  if (!split.test.empty()) model.accuracy = accuracy(model, data, split.test);
  return model;
}

// ---------------------------------------------------------------- attacks

EncoderParams prune(const EncoderParams& params, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error("prune: rate must lie in [0, 1]");
  std::vector<double> flat = params.flatten();
  const std::vector<bool> mask = params.weight_mask();
  std::vector<std::size_t> weights;
  for (std::size_t i = 0; i < flat.size(); ++i)
    if (mask[i]) weights.push_back(i);
  const auto k = static_cast<std::size_t>(std::floor(rate * double(weights.size())));
  std::stable_sort(weights.begin(), weights.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(flat[a]) < std::abs(flat[b]);
  });
  for (std::size_t i = 0; i < k; ++i) flat[weights[i]] = 0.0;
  EncoderParams out = params;
  out.assign(flat);
  return out;
}

EncoderParams overwrite(const EncoderParams& params,
                        const WatermarkKey& adversary_key, const Dataset& data,
                        const InjectionConfig& cfg, Rng& rng) {
  InjectionConfig plain = cfg;
  plain.mode = InjectionMode::kPlain;
  return inject_with_key(data, plain, adversary_key, params, rng).encoder;
}

// -------------------------------------------------------------------- zoo

void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t member_seed(std::uint64_t zoo_seed, Stream stream,
                          std::size_t index) {
  return derive_seed(derive_seed(zoo_seed, stream), index);
}

std::vector<EncoderParams> pretrain_independents(const Dataset& data,
                                                 const PretrainConfig& base,
                                                 std::size_t count,
                                                 std::uint64_t zoo_seed,
                                                 std::size_t jobs) {
  std::vector<EncoderParams> out(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    PretrainConfig cfg = base;
    cfg.seed = member_seed(zoo_seed, Stream::kZooIndependent, i);
    out[i] = pretrain(data, cfg);
  });
  return out;
}

ZooResult build_zoo(const EncoderParams& watermarked, const WatermarkKey& key,
                    const ZooSpec& spec, const Dataset& data, Rng& rng,
                    const std::vector<EncoderParams>* independents) {
  spec.validate();
  if (key.empty()) throw Error("zoo: empty key");
  ZooResult result;
  result.seed = rng();
  std::vector<EncoderParams> fresh;
  if (independents == nullptr) {
    fresh = pretrain_independents(data, spec.independent_pretrain,
                                  spec.n_independent, result.seed, spec.jobs);
    independents = &fresh;
  } else if (independents->size() < spec.n_independent) {
    throw Error("zoo: independent pool holds " +
                std::to_string(independents->size()) + " encoders, need " +
                std::to_string(spec.n_independent));
  }

  const std::size_t total = spec.n_piracy + spec.n_independent;
  std::vector<SuspectModel> models(total);
  std::vector<WatermarkKey> adversary_keys(spec.n_piracy);
  parallel_for(total, spec.jobs, [&](std::size_t m) {
    const bool piracy = m < spec.n_piracy;
    const std::size_t index = piracy ? m : m - spec.n_piracy;
    const std::uint64_t seed = member_seed(
        result.seed, piracy ? Stream::kZooPiracy : Stream::kZooIndependent, index);
    DownstreamConfig dcfg = spec.downstream;
    dcfg.seed = seed;
    SuspectModel model;
    if (!piracy) {
      model = train_downstream((*independents)[index], data, dcfg);
    } else {
      EncoderParams enc = watermarked;
      switch (spec.attack.kind) {
        case AttackKind::kNone:
        case AttackKind::kFinetuneThenPrune:
          break;
        case AttackKind::kPrune:
          enc = prune(enc, spec.attack.prune_rate);
          break;
        case AttackKind::kOverwrite: {
          InjectionConfig adv = spec.attack.adversary;
          adv.pretrain.seed = derive_seed(seed, Stream::kAdversary);
          Rng adv_rng = make_rng(adv.pretrain.seed, Stream::kKey);
          const WatermarkKey adv_key =
              build_key(adv, key.moments.mu.empty() ? feature_moments(data)
                                                    : key.moments,
                        adv_rng, &data);
          enc = overwrite(enc, adv_key, data, adv, adv_rng);
          adversary_keys[index] = adv_key;
          break;
        }
      }
      if (spec.attack.kind == AttackKind::kFinetuneThenPrune) {
        dcfg.scenario = Scenario::kFinetune;
        dcfg.epochs = spec.attack.finetune_epochs;
        model = train_downstream(enc, data, dcfg);
        model.encoder = prune(model.encoder, spec.attack.prune_rate);
        const Split split = split_dataset(data.size(), dcfg.label_rate, dcfg.seed);
        if (!split.test.empty()) model.accuracy = accuracy(model, data, split.test);
      } else {
        model = train_downstream(enc, data, dcfg);
      }
    }
    model.provenance = piracy ? Provenance::kPiracy : Provenance::kIndependent;
    model.id = std::string(piracy ? "piracy_" : "independent_") + std::to_string(index);
    models[m] = std::move(model);
  });

  for (const auto& model : models) {
    const VerificationReport r = ip_score(model, key);
    if (model.provenance == Provenance::kPiracy &&
        spec.attack.kind == AttackKind::kOverwrite) {
      const std::size_t index = result.adversary_scores.size();
      result.adversary_scores.push_back(
          adversary_keys[index].empty()
              ? 0.0
              : ip_score(model, adversary_keys[index]).ip_score);
    }
    ModelScore s;
    s.id = model.id;
    s.provenance = model.provenance;
    s.ip_score = r.ip_score;
    s.accuracy = model.accuracy;
    s.degenerate = r.degenerate;
    result.models.push_back(s);
    if (model.provenance == Provenance::kPiracy) {
      result.certificates.push_back(
          theorem1_certificate(model.encoder, model.head, key.pairs.front()));
    }
  }
  result.summary = summarize(result.models);
  return result;
}

}  // namespace pregip
