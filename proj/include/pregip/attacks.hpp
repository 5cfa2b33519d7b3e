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
#ifndef PREGIP_ATTACKS_HPP_
#define PREGIP_ATTACKS_HPP_

// Downstream training, watermark-removal attacks and the piracy /
// independent model zoo.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pregip/encoder.hpp"
#include "pregip/graphs.hpp"
#include "pregip/pretrain.hpp"
#include "pregip/verify.hpp"
#include "pregip/watermark.hpp"

namespace pregip {

enum class Scenario { kFix, kFinetune };

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct DownstreamConfig {
  Scenario scenario = Scenario::kFix;
  std::size_t epochs = 100;
  double label_rate = 0.5;
  double learning_rate = 1e-2;          // head
  double encoder_learning_rate = 1e-4;  // finetune scenario only
  std::size_t batch_size = 32;
  ClassifierArch head;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle; the first round(label_rate * n) graphs form the labeled
// training set, the rest are held out.
Split split_dataset(std::size_t n, double label_rate, std::uint64_t seed);

// Trains a head on top of `encoder` (frozen in kFix, jointly updated in
// kFinetune). accuracy is measured on the held-out graphs, when any.
SuspectModel train_downstream(const EncoderParams& encoder, const Dataset& data,
                              const DownstreamConfig& cfg);

double accuracy(const SuspectModel& model, const Dataset& data,
                std::span<const std::size_t> indices);

// Global magnitude pruning over every weight matrix (biases and GIN eps
// exempt): the floor(rate * total) smallest |w| are zeroed, ties broken by
// flat index.
EncoderParams prune(const EncoderParams& params, double rate);

// The adversary's watermark: plain joint objective with its own key,
// starting from the stolen parameters.
EncoderParams overwrite(const EncoderParams& params,
                        const WatermarkKey& adversary_key, const Dataset& data,
                        const InjectionConfig& cfg, Rng& rng);

enum class AttackKind { kNone, kPrune, kOverwrite, kFinetuneThenPrune };

const char* attack_name(AttackKind a);
AttackKind attack_from_name(const std::string& name);

struct AttackSchedule {
  AttackKind kind = AttackKind::kNone;
  double prune_rate = 0.3;
  // Finetune-then-prune: finetuning epochs before pruning.
  std::size_t finetune_epochs = 100;
  // Overwrite: the adversary's injection settings (plain mode is forced).
  InjectionConfig adversary;

  void validate() const;
};

struct ZooSpec {
  std::size_t n_piracy = 10;
  std::size_t n_independent = 10;
  DownstreamConfig downstream;
  AttackSchedule attack;
  // Base config of the independent pretrainings; the seed is replaced per
  // member.
  PretrainConfig independent_pretrain;
  std::size_t jobs = 1;

  void validate() const;
};

struct ZooResult {
  std::vector<ModelScore> models;
  ScoreSummary summary;
  std::vector<CertificateReport> certificates;  // piracy models, key pair 0
  // Overwrite attack: each piracy model's score on its adversary's key.
  std::vector<double> adversary_scores;
  std::uint64_t seed = 0;
};

// Member seeds: derive_seed(derive_seed(zoo_seed, stream), index) with the
// kZooPiracy / kZooIndependent streams.
std::uint64_t member_seed(std::uint64_t zoo_seed, Stream stream,
                          std::size_t index);

// Non-watermarked encoders pretrained with member seeds of the
// kZooIndependent stream, run on up to `jobs` threads.
std::vector<EncoderParams> pretrain_independents(const Dataset& data,
                                                 const PretrainConfig& base,
                                                 std::size_t count,
                                                 std::uint64_t zoo_seed,
                                                 std::size_t jobs);

// Trains n_piracy downstream models from `watermarked` (after the attack
// schedule) and n_independent from independent encoders, then scores all of
// them on `key`. `independents`, when given, must hold at least
// n_independent encoders and replaces the fresh pretrainings.
ZooResult build_zoo(const EncoderParams& watermarked, const WatermarkKey& key,
                    const ZooSpec& spec, const Dataset& data, Rng& rng,
                    const std::vector<EncoderParams>* independents = nullptr);

// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace pregip

#endif  // PREGIP_ATTACKS_HPP_
