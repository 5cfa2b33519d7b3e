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
// Pipeline runner: keygen, pretrain, inject, downstream, verify, attack,
// experiment and print-config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pregip/attacks.hpp"
#include "pregip/config.hpp"
#include "pregip/error.hpp"
#include "pregip/pipeline.hpp"
#include "pregip/verify.hpp"
#include "pregip/watermark.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pregip {
namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  std::string data;
};

// Appends one JSON record per line.
class JsonlLog {
 public:
  JsonlLog(const fs::path& path, bool append) : path_(path) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  }
  void write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw Error("write to '" + path_.string() + "' failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

struct Run {
  ExperimentConfig cfg;
  fs::path out;
  std::size_t jobs = 1;
  std::string data_path;

  fs::path file(const std::string& name) const { return out / name; }

  // Shared run log; every command appends its outputs here.
  void record(const std::string& command, json fields) const {
    JsonlLog log(file("run_log.jsonl"), true);
    fields["command"] = command;
    fields["seed"] = cfg.seed;
    log.write(fields);
  }

  Dataset dataset() const {
    return data_path.empty() ? experiment_dataset(cfg) : load_dataset(data_path);
  }
};

ExperimentConfig resolve_config(const Options& opt) {
  ExperimentConfig cfg;
  if (!opt.config.empty()) {
    cfg = load_config(opt.config, opt.seed);
  } else {
    if (!opt.seed) throw ConfigError("seed: required (pass --seed or a config file)");
    cfg = config_from_json(json::object(), opt.seed);
  }
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  return cfg;
}

Run make_run(const Options& opt) {
  if (opt.jobs < 1) throw ConfigError("jobs: must be >= 1");
  Run run;
  run.cfg = resolve_config(opt);
  run.out = run.cfg.output_dir;
  run.jobs = opt.jobs;
  run.data_path = opt.data;
  std::error_code ec;
  fs::create_directories(run.out, ec);
  if (ec) {
    throw Error("cannot create output directory '" + run.out.string() +
                "': " + ec.message());
  }
  return run;
}

void write_injection_log(const InjectionResult& r, const fs::path& path) {
  JsonlLog log(path, false);
  for (const auto& e : r.log) {
    log.write({{"epoch", e.epoch},
               {"L_pre", e.pretrain_loss},
               {"L_W", e.watermark_loss},
               {"max_delta_norm", e.max_delta_norm}});
  }
}

// Shortest round-trip representation.
std::string fmt(double v) { return json(v).dump(); }

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

json summary_json(const ScoreSummary& s) {
  json j = {{"piracy_score_mean", s.piracy_score.mean},
            {"independent_score_mean", s.independent_score.mean},
            {"piracy_accuracy_mean", s.piracy_accuracy.mean},
            {"piracy_accuracy_std", s.piracy_accuracy.std},
            {"independent_accuracy_mean", s.independent_accuracy.mean},
            {"independent_accuracy_std", s.independent_accuracy.std}};
  j["ip_gap"] = s.ip_gap ? json(*s.ip_gap) : json(nullptr);
  j["ip_roc"] = s.ip_roc ? json(*s.ip_roc) : json(nullptr);
  if (!s.caveats.empty()) j["caveats"] = s.caveats;
  return j;
}

void write_zoo_reports(const ZooResult& zoo, const fs::path& stem) {
  write_report(zoo.models, zoo.summary, fs::path(stem).concat(".jsonl"));
  write_score_csv(zoo.models, fs::path(stem).concat(".csv"));
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
    out_ << header << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i ? "," : "") << cells[i];
    }
    out_ << '\n';
    out_.flush();
    if (!out_) throw Error("write to '" + path_.string() + "' failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

constexpr const char* kSummaryHeader =
    "method,accuracy_mean,accuracy_std,ip_gap,ip_roc";

std::vector<std::string> summary_row(const std::string& method,
                                     const ScoreSummary& s) {
  return {method, fmt(s.piracy_accuracy.mean), fmt(s.piracy_accuracy.std),
          fmt(s.ip_gap), fmt(s.ip_roc)};
}

// ------------------------------------------------------------------ commands

int cmd_print_config(const Options& opt) {
  Options o = opt;
  if (o.config.empty() && !o.seed) o.seed = 0;
  std::cout << config_to_json(resolve_config(o)).dump(2) << '\n';
  return 0;
}

int cmd_keygen(const Options& opt, const std::string& key_out) {
  const Run run = make_run(opt);
  const Dataset data = run.dataset();
  const WatermarkKey key = owner_key(run.cfg, run.cfg.injection, data);
  const fs::path path = key_out.empty() ? run.file("key.jsonl") : fs::path(key_out);
  save_key(key, path);
  if (key.empty()) std::cerr << "warning: key has no pairs\n";
  std::cout << "wrote " << key.size() << " pairs (" << key.base_node_count
            << " and " << key.base_node_count + key.node_count_delta
            << " nodes) to " << path.string() << '\n';
  run.record("keygen", {{"key", path.string()}, {"pairs", key.size()}});
  return 0;
}

int cmd_pretrain(const Options& opt) {
  const Run run = make_run(opt);
  const Dataset data = run.dataset();
  std::vector<double> losses;
  const EncoderParams enc = pretrain(data, run.cfg.pretrain, &losses);
  const fs::path path = run.file("encoder_baseline.json");
  save_encoder(enc, path);
  JsonlLog log(run.file("pretrain_log.jsonl"), false);
  for (std::size_t e = 0; e < losses.size(); ++e) {
    log.write({{"epoch", e}, {"L_pre", losses[e]}});
  }
  std::cout << "wrote " << path.string() << " (final loss "
            << (losses.empty() ? 0.0 : losses.back()) << ")\n";
  run.record("pretrain", {{"encoder", path.string()},
                          {"final_loss", losses.empty() ? 0.0 : losses.back()}});
  return 0;
}

int cmd_inject(const Options& opt, const std::string& key_path,
               const std::string& ablation, const std::string& mode) {
  Run run = make_run(opt);
  InjectionConfig& icfg = run.cfg.injection;
  try {
    if (!ablation.empty()) icfg.ablation = ablation_from_name(ablation);
    if (!mode.empty()) icfg.mode = mode_from_name(mode);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const Dataset data = run.dataset();
  WatermarkKey key = key_path.empty() ? owner_key(run.cfg, icfg, data) : load_key(key_path);
  const InjectionResult r = run_injection(run.cfg, icfg, data, std::move(key));
  const std::string tag = injection_tag(icfg);
  const fs::path enc_path = run.file("encoder_" + tag + ".json");
  const fs::path key_out = run.file("key_" + tag + ".jsonl");
  const fs::path log_path = run.file("inject_" + tag + ".jsonl");
  save_encoder(r.encoder, enc_path);
  save_key(r.key, key_out);
  write_injection_log(r, log_path);
  const double first = r.log.empty() ? 0.0 : r.log.front().watermark_loss;
  const double last = r.log.empty() ? 0.0 : r.log.back().watermark_loss;
  std::cout << "wrote " << enc_path.string() << ", " << key_out.string()
            << ", " << log_path.string() << " (L_W " << first << " -> " << last
            << ", max |delta| " << r.max_delta_norm << ")\n";
  run.record("inject", {{"tag", tag},
                        {"encoder", enc_path.string()},
                        {"key", key_out.string()},
                        {"L_W_first", first},
                        {"L_W_last", last},
                        {"max_delta_norm", r.max_delta_norm}});
  return 0;
}

int cmd_downstream(const Options& opt, const std::string& encoder_path,
                   const std::string& scenario, const std::string& provenance,
                   const std::string& model_out) {
  Run run = make_run(opt);
  DownstreamConfig dcfg = run.cfg.downstream;
  try {
    if (!scenario.empty()) dcfg.scenario = scenario_from_name(scenario);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const Dataset data = run.dataset();
  SuspectModel model = train_downstream(load_encoder(encoder_path), data, dcfg);
  model.id = fs::path(encoder_path).stem().string() + "_" +
             scenario_name(dcfg.scenario);
  model.provenance = provenance_from_name(provenance);
  const fs::path path = model_out.empty()
                            ? run.file("model_" + model.id + ".json")
                            : fs::path(model_out);
  save_suspect(model, path);
  std::cout << "wrote " << path.string() << " (accuracy "
            << fmt(model.accuracy) << ")\n";
  run.record("downstream", {{"model", path.string()},
                            {"scenario", scenario_name(dcfg.scenario)},
                            {"accuracy", model.accuracy ? json(*model.accuracy)
                                                        : json(nullptr)}});
  return 0;
}

int cmd_verify(const Options& opt, const std::string& key_path,
               const std::vector<std::string>& model_paths,
               const std::string& encoder_path, const std::string& scenario,
               const std::string& report) {
  Run run = make_run(opt);
  if (model_paths.empty() == encoder_path.empty()) {
    throw ConfigError("verify: pass either --model files or --encoder");
  }
  const WatermarkKey key = load_key(key_path);
  if (key.empty()) throw Error("verify: key '" + key_path + "' has no pairs");
  const fs::path stem = report.empty() ? run.file("verify_report")
                                       : fs::path(report).replace_extension();
  std::vector<ModelScore> scores;
  ScoreSummary summary;
  if (!model_paths.empty()) {
    for (const auto& p : model_paths) {
      const SuspectModel m = load_suspect(p);
      const VerificationReport r = ip_score(m, key);
      scores.push_back({m.id, m.provenance, r.ip_score, m.accuracy, r.degenerate});
    }
    summary = summarize(scores);
  } else {
    Scenario sc = run.cfg.downstream.scenario;
    try {
      if (!scenario.empty()) sc = scenario_from_name(scenario);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    const Dataset data = run.dataset();
    const auto pool = independent_pool(run.cfg, data, run.jobs);
    ZooSpec spec = run.cfg.zoo_spec(sc, run.jobs);
    spec.attack.kind = AttackKind::kNone;
    const ZooResult zoo = run_zoo(run.cfg, load_encoder(encoder_path), key, spec,
                                  data, pool);
    scores = zoo.models;
    summary = zoo.summary;
  }
  write_report(scores, summary, fs::path(stem).concat(".jsonl"));
  write_score_csv(scores, fs::path(stem).concat(".csv"));

  std::vector<double> pool_scores;
  for (const auto& s : scores) {
    if (s.provenance == Provenance::kIndependent) pool_scores.push_back(s.ip_score);
  }
  for (const auto& s : scores) {
    std::cout << s.id << " " << provenance_name(s.provenance) << " ip_score "
              << s.ip_score << (s.degenerate ? " (degenerate model)" : "");
    if (s.provenance == Provenance::kUnknown && !pool_scores.empty()) {
      const Verdict v = three_sigma_verdict(s.ip_score, pool_scores);
      std::cout << (v.piracy_suspect ? " piracy-suspect" : " not-flagged")
                << " (threshold " << v.threshold << ")";
    }
    std::cout << '\n';
  }
  if (summary.ip_roc) {
    std::cout << "ip_gap " << fmt(summary.ip_gap) << " ip_roc "
              << fmt(summary.ip_roc) << '\n';
  }
  for (const auto& c : summary.caveats) std::cout << "caveat: " << c << '\n';
  run.record("verify", {{"report", fs::path(stem).concat(".jsonl").string()},
                        {"summary", summary_json(summary)}});
  return 0;
}

// One zoo per sweep point; the independent pool is shared.
void attack_sweep(const Run& run, AttackKind kind, const EncoderParams& wm,
                  const WatermarkKey& key, const Dataset& data,
                  const std::vector<EncoderParams>& pool, CsvFile& csv,
                  json& records) {
  struct Point {
    std::string param;
    double value;
    ZooSpec spec;
  };
  std::vector<Point> points;
  const ZooSpec base = run.cfg.zoo_spec(run.cfg.downstream.scenario, run.jobs);
  switch (kind) {
    case AttackKind::kNone:
      break;
    case AttackKind::kPrune:
      for (double r : run.cfg.sweep.prune_rates) {
        ZooSpec s = base;
        s.attack.kind = kind;
        s.attack.prune_rate = r;
        points.push_back({"prune_rate", r, s});
      }
      break;
    case AttackKind::kOverwrite: {
      ZooSpec s = base;
      s.attack.kind = kind;
      points.push_back({"adversary_epochs", double(s.attack.adversary.pretrain.epochs), s});
      break;
    }
    case AttackKind::kFinetuneThenPrune:
      for (double r : run.cfg.sweep.prune_rates) {
        ZooSpec s = base;
        s.downstream.scenario = Scenario::kFinetune;
        s.attack.kind = kind;
        s.attack.prune_rate = r;
        points.push_back({"prune_rate", r, s});
      }
      break;
  }
  for (const auto& p : points) {
    const ZooResult zoo = run_zoo(run.cfg, wm, key, p.spec, data, pool);
    const MeanStd adv = mean_std(zoo.adversary_scores);
    csv.row({attack_name(kind), p.param, fmt(p.value),
             scenario_name(p.spec.downstream.scenario),
             fmt(zoo.summary.piracy_accuracy.mean),
             fmt(zoo.summary.piracy_accuracy.std), fmt(zoo.summary.ip_gap),
             fmt(zoo.summary.ip_roc),
             zoo.adversary_scores.empty() ? "" : fmt(adv.mean)});
    json rec = summary_json(zoo.summary);
    rec["attack"] = attack_name(kind);
    rec[p.param] = p.value;
    if (!zoo.adversary_scores.empty()) rec["adversary_ip_score_mean"] = adv.mean;
    records.push_back(rec);
    std::cout << attack_name(kind) << " " << p.param << "=" << p.value
              << " ip_roc " << fmt(zoo.summary.ip_roc) << " accuracy "
              << zoo.summary.piracy_accuracy.mean << '\n';
  }
}

constexpr const char* kAttackHeader =
    "attack,param,value,scenario,accuracy_mean,accuracy_std,ip_gap,ip_roc,"
    "adversary_ip_score";

// Finetune attack: the downstream finetuning length is the swept variable.
void finetune_sweep(const Run& run, const EncoderParams& wm,
                    const WatermarkKey& key, const Dataset& data,
                    const std::vector<EncoderParams>& pool, CsvFile& csv,
                    json& records) {
  for (std::size_t epochs : run.cfg.sweep.finetune_epochs) {
    ZooSpec s = run.cfg.zoo_spec(Scenario::kFinetune, run.jobs);
    s.attack.kind = AttackKind::kNone;
    s.downstream.epochs = epochs;
    const ZooResult zoo = run_zoo(run.cfg, wm, key, s, data, pool);
    csv.row({"finetune", "epochs", std::to_string(epochs), "finetune",
             fmt(zoo.summary.piracy_accuracy.mean),
             fmt(zoo.summary.piracy_accuracy.std), fmt(zoo.summary.ip_gap),
             fmt(zoo.summary.ip_roc), ""});
    json rec = summary_json(zoo.summary);
    rec["attack"] = "finetune";
    rec["epochs"] = epochs;
    records.push_back(rec);
    std::cout << "finetune epochs=" << epochs << " ip_roc "
              << fmt(zoo.summary.ip_roc) << '\n';
  }
}

int cmd_attack(const Options& opt, const std::string& encoder_path,
               const std::string& key_path, const std::string& kind_name) {
  Run run = make_run(opt);
  const bool finetune = kind_name == "finetune";
  AttackKind kind = AttackKind::kNone;
  if (!finetune) {
    try {
      kind = attack_from_name(kind_name);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (kind == AttackKind::kNone) throw ConfigError("attack.kind: 'none' is not an attack");
  }
  const Dataset data = run.dataset();
  const EncoderParams wm = load_encoder(encoder_path);
  const WatermarkKey key = load_key(key_path);
  const auto pool = independent_pool(run.cfg, data, run.jobs);
  CsvFile csv(run.file("attack_" + kind_name + ".csv"), kAttackHeader);
  json records = json::array();
  if (finetune) {
    finetune_sweep(run, wm, key, data, pool, csv, records);
  } else {
    attack_sweep(run, kind, wm, key, data, pool, csv, records);
  }
  run.record("attack", {{"kind", kind_name}, {"points", records}});
  return 0;
}

struct MethodRow {
  std::string scenario;
  std::string method;
  ScoreSummary summary;
};

std::vector<MethodRow> scenario_table(const Run& run, const EncoderParams& wm,
                                      const EncoderParams& baseline,
                                      const WatermarkKey& key,
                                      const Dataset& data,
                                      const std::vector<EncoderParams>& pool,
                                      bool write_reports) {
  std::vector<MethodRow> rows;
  for (Scenario sc : {Scenario::kFix, Scenario::kFinetune}) {
    ZooSpec spec = run.cfg.zoo_spec(sc, run.jobs);
    spec.attack.kind = AttackKind::kNone;
    const std::string name = scenario_name(sc);
    const ZooResult pregip = run_zoo(run.cfg, wm, key, spec, data, pool);
    const ZooResult plain = run_zoo(run.cfg, baseline, key, spec, data, pool);
    if (write_reports) {
      write_zoo_reports(pregip, run.file("zoo_" + name + "_pregip"));
      write_zoo_reports(plain, run.file("zoo_" + name + "_nonwatermarked"));
    }
    rows.push_back({name, "PreGIP", pregip.summary});
    rows.push_back({name, "non-watermarked", plain.summary});
  }
  return rows;
}

int cmd_experiment(const Options& opt, bool sweep) {
  const Run run = make_run(opt);
  const ExperimentConfig& cfg = run.cfg;
  {
    std::ofstream f(run.file("config.json"));
    f << config_to_json(cfg).dump(2) << '\n';
    if (!f) throw Error("cannot write config.json");
  }
  const Dataset data = run.dataset();
  save_dataset(data, run.file("benchmark.jsonl"));
  std::cout << "benchmark: " << data.size() << " graphs\n";

  std::vector<double> losses;
  const EncoderParams baseline = pretrain(data, cfg.pretrain, &losses);
  save_encoder(baseline, run.file("encoder_baseline.json"));
  {
    JsonlLog log(run.file("pretrain_log.jsonl"), false);
    for (std::size_t e = 0; e < losses.size(); ++e) {
      log.write({{"epoch", e}, {"L_pre", losses[e]}});
    }
  }
  std::cout << "baseline pretrained\n";

  const WatermarkKey key = owner_key(run.cfg, cfg.injection, data);
  const InjectionResult inj = run_injection(run.cfg, cfg.injection, data, key);
  const std::string tag = injection_tag(cfg.injection);
  save_encoder(inj.encoder, run.file("encoder_" + tag + ".json"));
  save_key(inj.key, run.file("key_" + tag + ".jsonl"));
  write_injection_log(inj, run.file("inject_" + tag + ".jsonl"));
  std::cout << "watermark injected (" << tag << ")\n";

  const auto pool = independent_pool(run.cfg, data, run.jobs);
  std::cout << "independent encoders pretrained: " << pool.size() << '\n';

  json summary;
  summary["scenarios"] = json::array();
  const auto rows = scenario_table(run, inj.encoder, baseline, inj.key, data,
                                   pool, true);
  for (const std::string name : {"fix", "finetune"}) {
    CsvFile csv(run.file("summary_" + name + ".csv"), kSummaryHeader);
    for (const auto& r : rows) {
      if (r.scenario != name) continue;
      csv.row(summary_row(r.method, r.summary));
      json rec = summary_json(r.summary);
      rec["scenario"] = r.scenario;
      rec["method"] = r.method;
      summary["scenarios"].push_back(rec);
      std::cout << name << " " << r.method << ": accuracy "
                << r.summary.piracy_accuracy.mean << " +- "
                << r.summary.piracy_accuracy.std << ", ip_gap "
                << fmt(r.summary.ip_gap) << ", ip_roc " << fmt(r.summary.ip_roc)
                << '\n';
    }
  }

  CsvFile attacks(run.file("attacks.csv"), kAttackHeader);
  json attack_records = json::array();
  for (AttackKind kind : {AttackKind::kPrune, AttackKind::kOverwrite,
                          AttackKind::kFinetuneThenPrune}) {
    Run single = run;
    single.cfg.sweep.prune_rates = {cfg.attack.prune_rate};
    attack_sweep(single, kind, inj.encoder, inj.key, data, pool, attacks,
                 attack_records);
  }
  summary["attacks"] = attack_records;

  if (sweep) {
    CsvFile csv(run.file("sweep.csv"),
                "param,value,scenario,method,accuracy_mean,accuracy_std,ip_gap,ip_roc");
    json points = json::array();
    auto point = [&](const std::string& param, double value, InjectionConfig icfg) {
      const InjectionResult r = run_injection(run.cfg, icfg, data, key);
      for (const auto& row :
           scenario_table(run, r.encoder, baseline, r.key, data, pool, false)) {
        if (row.method != "PreGIP") continue;
        const auto cells = summary_row(row.method, row.summary);
        csv.row({param, fmt(value), row.scenario, cells[0], cells[1], cells[2],
                 cells[3], cells[4]});
        json rec = summary_json(row.summary);
        rec[param] = value;
        rec["scenario"] = row.scenario;
        points.push_back(rec);
        std::cout << "sweep " << param << "=" << value << " " << row.scenario
                  << " ip_roc " << fmt(row.summary.ip_roc) << '\n';
      }
    };
    for (double lambda : cfg.sweep.lambdas) {
      InjectionConfig icfg = cfg.injection;
      icfg.lambda = lambda;
      point("lambda", lambda, icfg);
    }
    for (double eps : cfg.sweep.epsilons) {
      InjectionConfig icfg = cfg.injection;
      icfg.epsilon = eps;
      point("epsilon", eps, icfg);
    }
    summary["sweep"] = points;
  }

  {
    std::ofstream f(run.file("summary.json"));
    f << summary.dump(2) << '\n';
    if (!f) throw Error("cannot write summary.json");
  }
  run.record("experiment", summary);
  return 0;
}

}  // namespace
}  // namespace pregip

int main(int argc, char** argv) {
  using namespace pregip;
  CLI::App app{"PreGIP: watermarking pretrained graph encoders"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Experiment config file (JSON)");
    sub->add_option("--seed", opt.seed, "Global seed (overrides the config)");
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--data", opt.data, "Dataset file instead of the synthetic benchmark");
  };

  std::string key_path, key_out, encoder_path, scenario, provenance = "unknown",
              model_out, report, ablation, mode, kind;
  std::vector<std::string> models;
  bool sweep = false;

  auto* print_config = app.add_subcommand("print-config", "Dump the resolved config");
  add_common(print_config);

  auto* keygen = app.add_subcommand("keygen", "Generate a watermark key");
  add_common(keygen);
  keygen->add_option("--key-out", key_out, "Key file (default OUT/key.jsonl)");

  auto* pre = app.add_subcommand("pretrain", "Non-watermarked pretraining");
  add_common(pre);

  auto* inj = app.add_subcommand("inject", "Pretrain with the watermark");
  add_common(inj);
  inj->add_option("--key", key_path, "Existing key file");
  inj->add_option("--ablation", ablation, "full|no_margin|real_graph_keys|no_ftr");
  inj->add_option("--mode", mode, "plain|finetune_resistant");

  auto* down = app.add_subcommand("downstream", "Train a downstream classifier");
  add_common(down);
  down->add_option("--encoder", encoder_path, "Encoder checkpoint")->required();
  down->add_option("--scenario", scenario, "fix|finetune");
  down->add_option("--provenance", provenance, "piracy|independent|unknown");
  down->add_option("--model-out", model_out, "Model file");

  auto* ver = app.add_subcommand("verify", "Score suspect models on a key");
  add_common(ver);
  ver->add_option("--key", key_path, "Key file")->required();
  ver->add_option("--model", models, "Suspect model files");
  ver->add_option("--encoder", encoder_path, "Encoder checkpoint; builds a zoo");
  ver->add_option("--scenario", scenario, "fix|finetune (zoo mode)");
  ver->add_option("--report", report, "Report path stem (.jsonl and .csv)");

  auto* att = app.add_subcommand("attack", "Watermark-removal attack sweeps");
  add_common(att);
  att->add_option("--encoder", encoder_path, "Watermarked encoder")->required();
  att->add_option("--key", key_path, "Owner key")->required();
  att->add_option("--kind", kind, "prune|finetune|overwrite|finetune_prune")->required();

  auto* exp = app.add_subcommand("experiment", "Full pipeline");
  add_common(exp);
  exp->add_flag("--sweep", sweep, "Also sweep lambda and epsilon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*print_config) return cmd_print_config(opt);
    if (*keygen) return cmd_keygen(opt, key_out);
    if (*pre) return cmd_pretrain(opt);
    if (*inj) return cmd_inject(opt, key_path, ablation, mode);
    if (*down) return cmd_downstream(opt, encoder_path, scenario, provenance, model_out);
    if (*ver) return cmd_verify(opt, key_path, models, encoder_path, scenario, report);
    if (*att) return cmd_attack(opt, encoder_path, key_path, kind);
    if (*exp) return cmd_experiment(opt, sweep);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
