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
#include "pregip/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

namespace pregip {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      const json& v = j_.at(key);
      if (!v.is_number_unsigned() &&
          !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        fail(key, "must be a non-negative integer");
      }
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "wrong type");
    }
  }

  template <typename T, typename Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    try {
      out = parse(j_.at(key).get<std::string>());
    } catch (const Error& e) {
      fail(key, e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : kEmpty, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail(k, "unknown field");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(field(key) + ": " + msg);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) throw ConfigError(path + ": " + msg);
}

}  // namespace

void ExperimentConfig::finalize() {
  pretrain.seed = seed;
  injection.pretrain = pretrain;
  attack.adversary = injection;
  attack.adversary.mode = InjectionMode::kPlain;
  attack.adversary.ablation = Ablation::kFull;
  attack.adversary.pretrain.epochs = adversary_epochs;
  downstream.seed = seed;
}

void ExperimentConfig::validate() const {
  const auto& b = benchmark;
  require(b.feature_dim >= 1, "benchmark.feature_dim", "must be >= 1");
  require(b.class_count >= 1, "benchmark.class_count", "must be >= 1");
  require(b.min_nodes >= 2, "benchmark.min_nodes", "must be >= 2");
  require(b.max_nodes >= b.min_nodes, "benchmark.max_nodes",
          "must be >= min_nodes");
  require(b.density_per_class.size() == b.class_count,
          "benchmark.density_per_class", "needs one entry per class");
  require(b.feature_shift_per_class.size() == b.class_count,
          "benchmark.feature_shift_per_class", "needs one entry per class");
  for (double p : b.density_per_class)
    require(p >= 0.0 && p <= 1.0, "benchmark.density_per_class",
            "entries must lie in [0, 1]");
  require(pretrain.epochs <= 100000, "pretrain.epochs", "unreasonably large");
  require(pretrain.arch.hidden_dim >= 1, "pretrain.hidden_dim", "must be >= 1");
  require(pretrain.arch.num_layers >= 1, "pretrain.num_layers", "must be >= 1");
  require(n_piracy >= 1, "zoo.n_piracy", "must be >= 1");
  require(n_independent >= 1, "zoo.n_independent", "must be >= 1");
  require(!sweep.lambdas.empty(), "sweep.lambdas", "must be non-empty");
  require(!sweep.epsilons.empty(), "sweep.epsilons", "must be non-empty");
  for (double l : sweep.lambdas) require(l >= 0.0, "sweep.lambdas", "must be >= 0");
  for (double e : sweep.epsilons) require(e >= 0.0, "sweep.epsilons", "must be >= 0");
  for (double r : sweep.prune_rates)
    require(r >= 0.0 && r <= 1.0, "sweep.prune_rates", "must lie in [0, 1]");
  // Sub-config checks already name their field paths.
  auto wrap = [](auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  wrap([&] { pretrain.validate(); });
  wrap([&] { injection.validate(); });
  wrap([&] { downstream.validate(); });
  wrap([&] { attack.validate(); });
}

ZooSpec ExperimentConfig::zoo_spec(Scenario scenario, std::size_t jobs) const {
  ZooSpec z;
  z.n_piracy = n_piracy;
  z.n_independent = n_independent;
  z.downstream = downstream;
  z.downstream.scenario = scenario;
  z.attack = attack;
  z.independent_pretrain = pretrain;
  z.jobs = jobs;
  return z;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["benchmark"] = {{"num_graphs", c.benchmark.num_graphs},
                    {"feature_dim", c.benchmark.feature_dim},
                    {"class_count", c.benchmark.class_count},
                    {"min_nodes", c.benchmark.min_nodes},
                    {"max_nodes", c.benchmark.max_nodes},
                    {"density_per_class", c.benchmark.density_per_class},
                    {"feature_shift_per_class", c.benchmark.feature_shift_per_class}};
  j["pretrain"] = {{"objective", objective_name(c.pretrain.objective)},
                   {"epochs", c.pretrain.epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"learning_rate", c.pretrain.learning_rate},
                   {"temperature", c.pretrain.temperature},
                   {"negative_edge_ratio", c.pretrain.negative_edge_ratio},
                   {"augment_ratio", c.pretrain.augment_ratio},
                   {"hidden_dim", c.pretrain.arch.hidden_dim},
                   {"num_layers", c.pretrain.arch.num_layers},
                   {"readout", readout_name(c.pretrain.arch.readout)}};
  const auto& in = c.injection;
  j["injection"] = {{"num_pairs", in.num_pairs},
                    {"lambda", in.lambda},
                    {"epsilon", in.epsilon},
                    {"inner_steps", in.inner_steps},
                    {"margin", in.margin},
                    {"neg_samples", in.neg_samples},
                    {"mode", mode_name(in.mode)},
                    {"ablation", ablation_name(in.ablation)},
                    {"base_node_count", in.base_node_count},
                    {"node_count_delta", in.node_count_delta},
                    {"edge_prob", in.edge_prob},
                    {"edge_prob_b", in.edge_prob_b ? json(*in.edge_prob_b) : json()}};
  const auto& d = c.downstream;
  j["downstream"] = {{"epochs", d.epochs},
                     {"label_rate", d.label_rate},
                     {"learning_rate", d.learning_rate},
                     {"encoder_learning_rate", d.encoder_learning_rate},
                     {"batch_size", d.batch_size},
                     {"head",
                      {{"depth", d.head.depth},
                       {"hidden_dim", d.head.hidden_dim},
                       {"activation", activation_name(d.head.activation)},
                       {"bias", d.head.bias}}}};
  j["zoo"] = {{"n_piracy", c.n_piracy}, {"n_independent", c.n_independent}};
  j["attack"] = {{"kind", attack_name(c.attack.kind)},
                 {"prune_rate", c.attack.prune_rate},
                 {"finetune_epochs", c.attack.finetune_epochs},
                 {"adversary_epochs", c.adversary_epochs}};
  j["sweep"] = {{"lambdas", c.sweep.lambdas},
                {"epsilons", c.sweep.epsilons},
                {"prune_rates", c.sweep.prune_rates},
                {"finetune_epochs", c.sweep.finetune_epochs}};
  return j;
}

ExperimentConfig config_from_json(const json& j,
                                  std::optional<std::uint64_t> seed_override) {
  ExperimentConfig c;
  Reader root(j, "");
  if (!root.has("seed") && !seed_override) {
    throw ConfigError("seed: missing (give it in the config or with --seed)");
  }
  root.read("seed", c.seed);
  if (seed_override) c.seed = *seed_override;
  std::string out = c.output_dir.string();
  root.read("output_dir", out);
  c.output_dir = out;

  {
    Reader r = root.child("benchmark");
    auto& b = c.benchmark;
    r.read("num_graphs", b.num_graphs);
    r.read("feature_dim", b.feature_dim);
    r.read("class_count", b.class_count);
    r.read("min_nodes", b.min_nodes);
    r.read("max_nodes", b.max_nodes);
    r.read("density_per_class", b.density_per_class);
    r.read("feature_shift_per_class", b.feature_shift_per_class);
    r.finish();
  }
  {
    Reader r = root.child("pretrain");
    auto& p = c.pretrain;
    r.read_enum("objective", p.objective, objective_from_name);
    r.read("epochs", p.epochs);
    r.read("batch_size", p.batch_size);
    r.read("learning_rate", p.learning_rate);
    r.read("temperature", p.temperature);
    r.read("negative_edge_ratio", p.negative_edge_ratio);
    r.read("augment_ratio", p.augment_ratio);
    r.read("hidden_dim", p.arch.hidden_dim);
    r.read("num_layers", p.arch.num_layers);
    r.read_enum("readout", p.arch.readout, readout_from_name);
    r.finish();
  }
  {
    Reader r = root.child("injection");
    auto& in = c.injection;
    r.read("num_pairs", in.num_pairs);
    r.read("lambda", in.lambda);
    r.read("epsilon", in.epsilon);
    r.read("inner_steps", in.inner_steps);
    r.read("margin", in.margin);
    r.read("neg_samples", in.neg_samples);
    r.read_enum("mode", in.mode, mode_from_name);
    r.read_enum("ablation", in.ablation, ablation_from_name);
    r.read("base_node_count", in.base_node_count);
    r.read("node_count_delta", in.node_count_delta);
    r.read("edge_prob", in.edge_prob);
    std::optional<double> pb;
    if (r.has("edge_prob_b") && !j.at("injection").at("edge_prob_b").is_null()) {
      double v = 0.0;
      r.read("edge_prob_b", v);
      pb = v;
    } else {
      json ignored;
      r.read("edge_prob_b", ignored);
    }
    in.edge_prob_b = pb;
    r.finish();
  }
  {
    Reader r = root.child("downstream");
    auto& d = c.downstream;
    r.read("epochs", d.epochs);
    r.read("label_rate", d.label_rate);
    r.read("learning_rate", d.learning_rate);
    r.read("encoder_learning_rate", d.encoder_learning_rate);
    r.read("batch_size", d.batch_size);
    Reader h = r.child("head");
    h.read("depth", d.head.depth);
    h.read("hidden_dim", d.head.hidden_dim);
    h.read_enum("activation", d.head.activation, activation_from_name);
    h.read("bias", d.head.bias);
    h.finish();
    r.finish();
  }
  {
    Reader r = root.child("zoo");
    r.read("n_piracy", c.n_piracy);
    r.read("n_independent", c.n_independent);
    r.finish();
  }
  {
    Reader r = root.child("attack");
    r.read_enum("kind", c.attack.kind, attack_from_name);
    r.read("prune_rate", c.attack.prune_rate);
    r.read("finetune_epochs", c.attack.finetune_epochs);
    r.read("adversary_epochs", c.adversary_epochs);
    r.finish();
  }
  {
    Reader r = root.child("sweep");
    r.read("lambdas", c.sweep.lambdas);
    r.read("epsilons", c.sweep.epsilons);
    r.read("prune_rates", c.sweep.prune_rates);
    r.read("finetune_epochs", c.sweep.finetune_epochs);
    r.finish();
  }
  root.finish();
  c.finalize();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j, seed_override);
}

}  // namespace pregip
