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
#ifndef PREGIP_CONFIG_HPP_
#define PREGIP_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pregip/attacks.hpp"
#include "pregip/graphs.hpp"
#include "pregip/pretrain.hpp"
#include "pregip/watermark.hpp"

namespace pregip {

// Raised for invalid or out-of-range configuration; the message starts with
// the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SweepConfig {
  std::vector<double> lambdas = {0.01, 0.1, 1.0, 5.0, 10.0};
  std::vector<double> epsilons = {0.1, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> prune_rates = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> finetune_epochs = {50, 100, 200};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  BenchmarkSpec benchmark;
  // Used by every pretraining, watermarked or not; its seed is the global
  // seed.
  PretrainConfig pretrain;
  InjectionConfig injection;  // .pretrain mirrors `pretrain`
  DownstreamConfig downstream;
  std::size_t n_piracy = 10;
  std::size_t n_independent = 10;
  AttackSchedule attack;  // .adversary derives from `injection`
  std::size_t adversary_epochs = 20;
  SweepConfig sweep;

  // Propagates the shared fields (seed, pretrain) into the sub-configs.
  void finalize();
  void validate() const;
  ZooSpec zoo_spec(Scenario scenario, std::size_t jobs) const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields and out-of-range values
// raise ConfigError naming the field path. `seed` must be present unless
// `seed_override` is given.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = {});

}  // namespace pregip

#endif  // PREGIP_CONFIG_HPP_
