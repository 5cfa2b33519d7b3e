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
#ifndef PREGIP_PIPELINE_HPP_
#define PREGIP_PIPELINE_HPP_

// Experiment stages with the seed streams fixed by the global seed. The CLI
// and the acceptance run share these so their numbers agree.

#include <cstddef>
#include <string>
#include <vector>

#include "pregip/attacks.hpp"
#include "pregip/config.hpp"
#include "pregip/watermark.hpp"

namespace pregip {

// Synthetic benchmark from the kBenchmark stream.
Dataset experiment_dataset(const ExperimentConfig& cfg);

// Owner key from the kKey stream.
WatermarkKey owner_key(const ExperimentConfig& cfg, const InjectionConfig& icfg,
                       const Dataset& data);

// Injection from the pretraining initialization; real-graph sampling uses
// the kRealSamples stream.
InjectionResult run_injection(const ExperimentConfig& cfg,
                              const InjectionConfig& icfg, const Dataset& data,
                              WatermarkKey key);

// "pregip", "plain", or the ablation name.
std::string injection_tag(const InjectionConfig& icfg);

// n_independent non-watermarked encoders from the kZooIndependent stream.
std::vector<EncoderParams> independent_pool(const ExperimentConfig& cfg,
                                            const Dataset& data,
                                            std::size_t jobs);

// Every zoo of a run draws its member seeds from the same stream, so piracy
// populations of different encoders share splits and head initializations.
ZooResult run_zoo(const ExperimentConfig& cfg, const EncoderParams& encoder,
                  const WatermarkKey& key, const ZooSpec& spec,
                  const Dataset& data, const std::vector<EncoderParams>& pool);

}  // namespace pregip

#endif  // PREGIP_PIPELINE_HPP_
