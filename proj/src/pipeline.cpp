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
#include "pregip/pipeline.hpp"

#include <utility>

namespace pregip {

Dataset experiment_dataset(const ExperimentConfig& cfg) {
  Rng rng = make_rng(cfg.seed, Stream::kBenchmark);
  return synth_benchmark(cfg.benchmark, rng);
}

WatermarkKey owner_key(const ExperimentConfig& cfg, const InjectionConfig& icfg,
                       const Dataset& data) {
  Rng rng = make_rng(cfg.seed, Stream::kKey);
  return build_key(icfg, feature_moments(data), rng, &data);
}

InjectionResult run_injection(const ExperimentConfig& cfg,
                              const InjectionConfig& icfg, const Dataset& data,
                              WatermarkKey key) {
  Rng rng = make_rng(cfg.seed, Stream::kRealSamples);
  return inject_with_key(data, icfg, std::move(key),
                         initial_encoder(data, icfg.pretrain), rng);
}

std::string injection_tag(const InjectionConfig& icfg) {
  if (icfg.ablation != Ablation::kFull) return ablation_name(icfg.ablation);
  return icfg.mode == InjectionMode::kPlain ? "plain" : "pregip";
}

std::vector<EncoderParams> independent_pool(const ExperimentConfig& cfg,
                                            const Dataset& data,
                                            std::size_t jobs) {
  return pretrain_independents(data, cfg.pretrain, cfg.n_independent,
                               derive_seed(cfg.seed, Stream::kZooIndependent),
                               jobs);
}

ZooResult run_zoo(const ExperimentConfig& cfg, const EncoderParams& encoder,
                  const WatermarkKey& key, const ZooSpec& spec,
                  const Dataset& data, const std::vector<EncoderParams>& pool) {
  Rng rng = make_rng(cfg.seed, Stream::kZooPiracy);
  return build_zoo(encoder, key, spec, data, rng, &pool);
}

}  // namespace pregip
