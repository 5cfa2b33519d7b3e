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
// Acceptance run: one PASS/FAIL line per criterion.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pregip/attacks.hpp"
#include "pregip/config.hpp"
#include "pregip/pipeline.hpp"
#include "pregip/pretrain.hpp"
#include "pregip/verify.hpp"
#include "pregip/watermark.hpp"
#include "test_util.hpp"

namespace pregip {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void report(const std::string& id, const std::string& title, const Outcome& o) {
  std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << title << ": "
            << o.detail << std::endl;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// ------------------------------------------------------------------- AC1

// Parameters off the ReLU kinks that zero-initialized biases create.
EncoderParams jittered_encoder(std::size_t in, std::size_t hidden, Rng& rng) {
  EncoderParams p = testing::small_encoder(in, hidden, 2, rng());
  std::vector<double> flat = p.flatten();
  const auto noise = testing::random_vector(flat.size(), 0.05, rng);
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += noise[i];
  p.assign(flat);
  return p;
}

struct GradientCase {
  std::string name;
  testing::GradCheck check;
};

Outcome gradient_soundness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::vector<GradientCase> cases;
  const std::size_t coords = 120;

  {  // InfoNCE on both views.
    const std::size_t n = 16, d = 8;
    const auto a = testing::random_vector(n * d, 1.0, rng);
    const auto b = testing::random_vector(n * d, 1.0, rng);
    ad::Tape tape;
    const ad::Tensor z1 = ad::Tensor::from({n, d}, a, true);
    const ad::Tensor z2 = ad::Tensor::from({n, d}, b, true);
    tape.backward(info_nce_loss(tape, z1, z2, 0.5));
    auto f1 = [&](std::span<const double> x) {
      ad::Tape t;
      return info_nce_loss(t, ad::Tensor::from({n, d}, {x.begin(), x.end()}),
                           ad::Tensor::from({n, d}, b), 0.5).item();
    };
    auto f2 = [&](std::span<const double> x) {
      ad::Tape t;
      return info_nce_loss(t, ad::Tensor::from({n, d}, a),
                           ad::Tensor::from({n, d}, {x.begin(), x.end()}), 0.5).item();
    };
    cases.push_back({"infonce_view1", testing::check_gradient(f1, a, z1.grad(), coords, rng)});
    cases.push_back({"infonce_view2", testing::check_gradient(f2, b, z2.grad(), coords, rng)});
  }

  const Dataset data = testing::small_dataset(24, 102);
  std::vector<const Graph*> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back(&data.graphs[i]);
  const EncoderParams params = jittered_encoder(data.feature_dim, 8, rng);
  const std::vector<double> theta = params.flatten();

  for (PretrainObjective objective :
       {PretrainObjective::kContrastive, PretrainObjective::kEdgePred}) {
    PretrainConfig cfg;
    cfg.objective = objective;
    const Rng stream(103);
    Rng r = stream;
    const LossAndGrad lg = pretext_loss_and_grad(params, batch, cfg, r);
    auto f = [&](std::span<const double> x) {
      EncoderParams q = params;
      q.assign(x);
      Rng s = stream;
      return pretext_loss_and_grad(q, batch, cfg, s).loss;
    };
    cases.push_back({std::string("pretext_") + objective_name(objective),
                     testing::check_gradient(f, theta, lg.grad, coords, rng)});
  }

  InjectionConfig icfg;
  icfg.num_pairs = 4;
  icfg.base_node_count = 6;
  icfg.node_count_delta = 5;
  Rng key_rng(104);
  const WatermarkKey key = build_key(icfg, feature_moments(data), key_rng);
  std::vector<const Graph*> real(data.graphs.size() > 16 ? 6 : 0);
  for (std::size_t i = 0; i < real.size(); ++i) real[i] = &data.graphs[10 + i];
  const WatermarkInputs inputs = WatermarkInputs::build(key, real, data.feature_dim);
  const double margin = 4.0;

  for (bool with_margin : {true, false}) {
    const LossAndGrad lg = watermark_loss_and_grad(params, inputs, margin, with_margin);
    auto f = [&](std::span<const double> x) {
      EncoderParams q = params;
      q.assign(x);
      return watermark_loss(q, key, real, margin, with_margin);
    };
    cases.push_back({with_margin ? "watermark" : "watermark_no_margin",
                     testing::check_gradient(f, theta, lg.grad, coords, rng)});
  }

  {  // Outer objective L_pre + lambda * sum_t L_W(theta + delta_t).
    const InnerAscent ascent = inner_ascent(params, inputs, margin, true, 0.05, 3);
    PretrainConfig pcfg;
    const double lambda = 0.7;
    const Rng stream(105);
    Rng r = stream;
    const std::vector<double> g =
        outer_gradient(params, batch, pcfg, r, inputs, margin, true, lambda, ascent.deltas);
    auto f = [&](std::span<const double> x) {
      EncoderParams q = params;
      q.assign(x);
      Rng s = stream;
      double total = pretext_loss_and_grad(q, batch, pcfg, s).loss;
      for (const auto& delta : ascent.deltas) {
        std::vector<double> moved(x.begin(), x.end());
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += delta[i];
        EncoderParams m = params;
        m.assign(moved);
        total += lambda * watermark_loss(m, key, real, margin, true);
      }
      return total;
    };
    cases.push_back({"outer", testing::check_gradient(f, theta, g, coords, rng)});
  }

  const double elapsed = seconds_since(t0);
  bool ok = elapsed <= 60.0;
  std::string detail;
  for (const auto& c : cases) {
    ok = ok && c.check.checked >= 100 && c.check.worst <= 1e-4;
    detail += c.name + "=" + num(c.check.worst, 2) + "/" + std::to_string(c.check.checked) + " ";
  }
  detail += "(worst rel err / coords, tol 1e-4), " + num(elapsed, 3) + " s (limit 60)";
  return {ok, detail};
}

// ------------------------------------------------------------------- AC2

Outcome certificate_soundness() {
  Rng rng(201);
  std::uniform_int_distribution<std::size_t> depth(1, 3), classes(2, 6), dim(2, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t instances = 5000;
  std::size_t certified = 0, violations = 0;
  for (std::size_t iter = 0; iter < instances; ++iter) {
    ClassifierArch arch;
    arch.depth = depth(rng);
    arch.hidden_dim = 6;
    arch.activation = static_cast<Activation>(iter % 3);
    arch.bias = iter % 2 == 0;
    const std::size_t d = dim(rng);
    const ClassifierParams head = init_classifier(d, classes(rng), arch, rng);
    const auto a = testing::random_vector(d, 1.0, rng);
    const double bound = theorem1_certificate(head, a, a).bound;
    auto dir = testing::random_vector(d, 1.0, rng);
    double n = 0.0;
    for (double x : dir) n += x * x;
    n = std::sqrt(n);
    const double r = 1.5 * unit(rng) * bound;
    std::vector<double> b = a;
    for (std::size_t i = 0; i < d; ++i) b[i] += r * dir[i] / n;
    const CertificateReport c = theorem1_certificate(head, a, b);
    if (c.certified) {
      ++certified;
      if (c.class_a != c.class_b) ++violations;
    }
  }

  // Spectral norm against a dense SVD.
  double worst = 0.0;
  std::size_t matrices = 0;
  std::uniform_int_distribution<std::size_t> side(1, 8);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t rows = side(rng), cols = side(rng);
    Matrix m = Matrix::zeros(rows, cols);
    if (iter % 4 == 3 && rows >= 2 && cols >= 2) {
      // Nearly repeated top singular values.
      Eigen::MatrixXd u = Eigen::MatrixXd::Random(rows, rows).householderQr().householderQ();
      Eigen::MatrixXd v = Eigen::MatrixXd::Random(cols, cols).householderQr().householderQ();
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, cols);
      s(0, 0) = 2.0;
      s(1, 1) = 2.0 - 1e-4 * unit(rng);
      for (std::size_t k = 2; k < std::min(rows, cols); ++k) s(k, k) = unit(rng);
      const Eigen::MatrixXd w = u * s * v.transpose();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m.data[i * cols + j] = w(i, j);
    } else {
      m.data = testing::random_vector(rows * cols, 1.0, rng);
    }
    Eigen::MatrixXd e(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) e(i, j) = m.data[i * cols + j];
    const double oracle = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues()(0);
    worst = std::max(worst, std::abs(spectral_norm(m) - oracle));
    ++matrices;
  }
  const bool ok = violations == 0 && certified >= 1000 && worst <= 1e-6;
  return {ok, std::to_string(violations) + " violations over " + std::to_string(certified) +
                  " certified of " + std::to_string(instances) +
                  " instances; spectral norm max |err| " + num(worst, 3) + " over " +
                  std::to_string(matrices) + " matrices (tol 1e-6)"};
}

// ------------------------------------------------------------------- AC8

Outcome verification_oracles() {
  Rng rng(801);
  std::uniform_int_distribution<int> size(1, 25), level(0, 20);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t mismatches = 0;
  const std::size_t sets = 1000;
  for (std::size_t iter = 0; iter < sets; ++iter) {
    std::vector<double> p(size(rng)), q(size(rng));
    // Half of the sets on the k/20 lattice of real scores, with ties.
    const bool lattice = iter % 2 == 0;
    for (double& x : p) x = lattice ? level(rng) / 20.0 : unit(rng);
    for (double& x : q) x = lattice ? level(rng) / 20.0 : unit(rng);
    double wins = 0.0;
    for (double a : p)
      for (double b : q) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    const double oracle = wins / (double(p.size()) * double(q.size()));
    if (ip_roc(p, q) != oracle) ++mismatches;
  }

  // Crafted prediction tables with hand counts.
  struct Table {
    std::vector<std::size_t> a, b;
    double expected;
    bool degenerate;
  };
  const std::vector<Table> tables = {
      {{0, 0, 0, 0}, {0, 0, 0, 0}, 1.0, true},
      {{0, 1, 0, 1}, {1, 0, 1, 0}, 0.0, false},
      {{0, 1, 2, 0, 1}, {0, 1, 2, 1, 1}, 0.8, false},
      {{2, 2, 2, 2}, {2, 2, 1, 2}, 0.75, false},
      {{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1},
       {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 0, 1, 0},
       0.6, false},
  };
  std::size_t table_errors = 0;
  for (const auto& t : tables) {
    const VerificationReport r = ip_score(t.a, t.b);
    if (r.ip_score != t.expected || r.degenerate != t.degenerate) ++table_errors;
  }
  return {mismatches == 0 && table_errors == 0,
          "ip_roc exact on " + std::to_string(sets - mismatches) + "/" + std::to_string(sets) +
              " score sets; ip_score matches " + std::to_string(tables.size() - table_errors) +
              "/" + std::to_string(tables.size()) + " hand tables"};
}

// --------------------------------------------------------------- context

// Injection runs of the acceptance session, for the ball assertion.
struct BallLedger {
  std::size_t runs = 0;
  std::size_t steps = 0;
  double worst_excess = -INFINITY;  // max over runs of max ||delta|| - eps
  bool violated = false;

  void add(const InjectionResult& r, double eps) {
    ++runs;
    steps += r.inner_steps_run;
    double m = r.max_delta_norm;
    for (const auto& e : r.log) m = std::max(m, e.max_delta_norm);
    if (r.inner_steps_run > 0) worst_excess = std::max(worst_excess, m - eps);
    if (m > eps + 1e-9) violated = true;
  }
};

struct SeedRun {
  ExperimentConfig cfg;
  Dataset data;
  WatermarkKey key;
  EncoderParams baseline;
  InjectionResult full;
  std::vector<EncoderParams> pool;
  std::optional<ZooResult> finetune_full;
};

SeedRun start_seed(std::uint64_t seed, std::size_t jobs, BallLedger& ledger) {
  SeedRun s;
  s.cfg = config_from_json(nlohmann::json::object(), seed);
  s.data = experiment_dataset(s.cfg);
  s.key = owner_key(s.cfg, s.cfg.injection, s.data);
  progress("seed " + std::to_string(seed) + ": injecting");
  s.full = run_injection(s.cfg, s.cfg.injection, s.data, s.key);
  ledger.add(s.full, s.cfg.injection.epsilon);
  progress("seed " + std::to_string(seed) + ": pretraining independents");
  s.pool = independent_pool(s.cfg, s.data, jobs);
  return s;
}

ZooResult zoo(const SeedRun& s, const EncoderParams& enc, Scenario sc, std::size_t jobs,
              AttackKind attack = AttackKind::kNone, double prune_rate = 0.0) {
  ZooSpec spec = s.cfg.zoo_spec(sc, jobs);
  spec.attack.kind = attack;
  spec.attack.prune_rate = prune_rate;
  return run_zoo(s.cfg, enc, s.key, spec, s.data, s.pool);
}

// ------------------------------------------------------------------- AC3

Outcome end_to_end(SeedRun& s, std::size_t jobs, double setup_seconds) {
  const auto t0 = Clock::now();
  progress("AC3: baseline pretraining");
  s.baseline = pretrain(s.data, s.cfg.pretrain);
  progress("AC3: fix zoos");
  const ZooResult fix = zoo(s, s.full.encoder, Scenario::kFix, jobs);
  const ZooResult fix_plain = zoo(s, s.baseline, Scenario::kFix, jobs);
  progress("AC3: finetune zoos");
  s.finetune_full = zoo(s, s.full.encoder, Scenario::kFinetune, jobs);
  const ZooResult ft_plain = zoo(s, s.baseline, Scenario::kFinetune, jobs);
  const double elapsed = setup_seconds + seconds_since(t0);

  const double roc_fix = fix.summary.ip_roc.value_or(0.0);
  const double roc_ft = s.finetune_full->summary.ip_roc.value_or(0.0);
  const double acc_fix = fix.summary.piracy_accuracy.mean;
  const double acc_fix_plain = fix_plain.summary.piracy_accuracy.mean;
  const double acc_ft = s.finetune_full->summary.piracy_accuracy.mean;
  const double acc_ft_plain = ft_plain.summary.piracy_accuracy.mean;
  const double drop_fix = std::abs(acc_fix - acc_fix_plain);
  const double drop_ft = std::abs(acc_ft - acc_ft_plain);
  const bool ok = roc_fix >= 0.90 && roc_ft >= 0.85 && drop_fix <= 0.03 && drop_ft <= 0.03 &&
                  elapsed <= 900.0;
  return {ok, "fix ip_roc " + num(roc_fix) + " (>= 0.90), finetune ip_roc " + num(roc_ft) +
                  " (>= 0.85); accuracy fix " + num(acc_fix) + " vs " + num(acc_fix_plain) +
                  ", finetune " + num(acc_ft) + " vs " + num(acc_ft_plain) +
                  " non-watermarked (|diff| <= 0.03); " + num(elapsed, 4) +
                  " s (limit 900)"};
}

// ------------------------------------------------------------------- AC5

Outcome pruning(const SeedRun& s, std::size_t jobs) {
  progress("AC5: pruned zoo");
  const ZooResult z = zoo(s, s.full.encoder, Scenario::kFix, jobs, AttackKind::kPrune, 0.3);
  const double roc = z.summary.ip_roc.value_or(0.0);

  // Unit properties on the watermarked encoder and random encoders.
  Rng rng(501);
  std::size_t failures = 0, cases = 0;
  std::vector<EncoderParams> encoders = {s.full.encoder};
  for (int i = 0; i < 20; ++i) encoders.push_back(testing::small_encoder(5, 7, 2, 600 + i));
  for (const auto& enc : encoders) {
    for (double rate : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
      ++cases;
      const EncoderParams p = prune(enc, rate);
      const auto mask = enc.weight_mask();
      const auto before = enc.flatten(), after = p.flatten();
      std::size_t total = 0, zeros = 0, zeros_before = 0;
      bool exempt_kept = true;
      for (std::size_t i = 0; i < after.size(); ++i) {
        if (!mask[i]) {
          exempt_kept = exempt_kept && after[i] == before[i];
          continue;
        }
        ++total;
        zeros += after[i] == 0.0;
        zeros_before += before[i] == 0.0;
      }
      const auto k = static_cast<std::size_t>(std::floor(rate * double(total)));
      // Weights already at zero may be among the pruned ones.
      const bool count_ok = zeros_before == 0 ? zeros == k : zeros >= k;
      if (!count_ok || !exempt_kept || !(prune(p, rate) == p)) ++failures;
    }
  }
  (void)rng;
  return {roc >= 0.80 && failures == 0,
          "prune 0.3 ip_roc " + num(roc) + " (>= 0.80); idempotence and zero count held on " +
              std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases"};
}

// ------------------------------------------------------------------- AC6

struct AblationPoint {
  double roc_full = 0.0, roc_no_ftr = 0.0;
  double acc_full = 0.0, acc_no_margin = 0.0;
};

AblationPoint ablation_seed(SeedRun& s, std::size_t jobs, BallLedger& ledger) {
  AblationPoint p;
  const std::string tag = "seed " + std::to_string(s.cfg.seed);
  InjectionConfig no_ftr = s.cfg.injection;
  no_ftr.ablation = Ablation::kNoFtr;
  InjectionConfig no_margin = s.cfg.injection;
  no_margin.ablation = Ablation::kNoMargin;
  progress(tag + ": no_ftr / no_margin injections");
  const InjectionResult r_no_ftr = run_injection(s.cfg, no_ftr, s.data, s.key);
  const InjectionResult r_no_margin = run_injection(s.cfg, no_margin, s.data, s.key);
  ledger.add(r_no_ftr, no_ftr.epsilon);
  ledger.add(r_no_margin, no_margin.epsilon);
  progress(tag + ": finetune zoos");
  if (!s.finetune_full) s.finetune_full = zoo(s, s.full.encoder, Scenario::kFinetune, jobs);
  const ZooResult ft_no_ftr = zoo(s, r_no_ftr.encoder, Scenario::kFinetune, jobs);
  p.roc_full = s.finetune_full->summary.ip_roc.value_or(0.0);
  p.roc_no_ftr = ft_no_ftr.summary.ip_roc.value_or(0.0);
  progress(tag + ": fix zoos");
  p.acc_full = zoo(s, s.full.encoder, Scenario::kFix, jobs).summary.piracy_accuracy.mean;
  p.acc_no_margin = zoo(s, r_no_margin.encoder, Scenario::kFix, jobs).summary.piracy_accuracy.mean;
  std::cerr << "  .. " << tag << ": roc full " << p.roc_full << " no_ftr " << p.roc_no_ftr
            << "; acc full " << p.acc_full << " no_margin " << p.acc_no_margin << std::endl;
  return p;
}

Outcome ablation_direction(const std::vector<AblationPoint>& points) {
  double roc_full = 0.0, roc_no_ftr = 0.0, acc_full = 0.0, acc_no_margin = 0.0;
  for (const auto& p : points) {
    roc_full += p.roc_full;
    roc_no_ftr += p.roc_no_ftr;
    acc_full += p.acc_full;
    acc_no_margin += p.acc_no_margin;
  }
  const double n = double(points.size());
  roc_full /= n;
  roc_no_ftr /= n;
  acc_full /= n;
  acc_no_margin /= n;
  return {roc_full > roc_no_ftr && acc_no_margin <= acc_full,
          "over " + std::to_string(points.size()) + " seeds: finetune ip_roc full " +
              num(roc_full) + " > no_ftr " + num(roc_no_ftr) + "; accuracy no_margin " +
              num(acc_no_margin) + " <= full " + num(acc_full)};
}

// ------------------------------------------------------------------- AC7

Outcome reduction_identities(const SeedRun& s, BallLedger& ledger) {
  progress("AC7: reduction identities");
  // eps = 0 finetune-resistant run against the plain objective.
  InjectionConfig zero = s.cfg.injection;
  zero.epsilon = 0.0;
  InjectionConfig plain = zero;
  plain.mode = InjectionMode::kPlain;
  const InjectionResult a = run_injection(s.cfg, zero, s.data, s.key);
  const InjectionResult b = run_injection(s.cfg, plain, s.data, s.key);
  ledger.add(a, 0.0);
  const bool eps_identity = a.encoder == b.encoder;

  // lambda = 0 plain run against non-watermarked pretraining.
  InjectionConfig no_wm = s.cfg.injection;
  no_wm.mode = InjectionMode::kPlain;
  no_wm.lambda = 0.0;
  const InjectionResult c = run_injection(s.cfg, no_wm, s.data, s.key);
  const EncoderParams base = s.baseline.layers.empty() ? pretrain(s.data, s.cfg.pretrain)
                                                       : s.baseline;
  const bool lambda_identity = c.encoder == base;
  return {eps_identity && lambda_identity,
          std::string("eps=0 vs plain objective ") + (eps_identity ? "bit-identical" : "DIFFER") +
              "; lambda=0 plain vs pretraining " +
              (lambda_identity ? "bit-identical" : "DIFFER")};
}

// ------------------------------------------------------------------- AC4

Outcome ball_constraint(BallLedger& ledger) {
  // Extra runs over a range of radii on a small benchmark.
  const Dataset data = testing::small_dataset(40, 401);
  for (double eps : {1e-3, 0.1, 1.0, 2.0, 10.0, 100.0}) {
    InjectionConfig cfg;
    cfg.epsilon = eps;
    cfg.num_pairs = 5;
    cfg.base_node_count = 6;
    cfg.node_count_delta = 5;
    cfg.neg_samples = 8;
    cfg.lambda = 1.0;
    cfg.pretrain.epochs = 5;
    cfg.pretrain.batch_size = 8;
    cfg.pretrain.arch.hidden_dim = 16;
    cfg.pretrain.seed = 402;
    Rng rng(403);
    ledger.add(inject(data, cfg, rng), eps);
  }
  return {!ledger.violated && ledger.runs > 0,
          std::to_string(ledger.runs) + " injection runs, " + std::to_string(ledger.steps) +
              " inner steps; max(||delta|| - eps) = " + num(ledger.worst_excess, 3) +
              " (slack 1e-9)"};
}

}  // namespace
}  // namespace pregip

int main(int argc, char** argv) {
  using namespace pregip;
  CLI::App app{"Acceptance criteria"};
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  std::size_t jobs = 1;
  std::vector<std::string> only;
  app.add_option("--seed", seed, "First global seed");
  app.add_option("--seeds", seeds, "Seeds for the ablation criterion")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Criteria to run (AC1..AC8)");
  CLI11_PARSE(app, argc, argv);
  const std::set<std::string> selected(only.begin(), only.end());
  auto want = [&](const std::string& id) { return selected.empty() || selected.count(id); };

  std::map<std::string, Outcome> results;
  auto run = [&](const std::string& id, const std::string& title, auto&& fn) {
    if (!want(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    results[id] = o;
    report(id, title, o);
  };

  run("AC1", "gradient soundness", [] { return gradient_soundness(); });
  run("AC2", "certificate soundness", [] { return certificate_soundness(); });
  run("AC8", "verification oracles", [] { return verification_oracles(); });

  BallLedger ledger;
  const bool heavy = want("AC3") || want("AC4") || want("AC5") || want("AC6") || want("AC7");
  std::optional<SeedRun> first;
  double setup_seconds = 0.0;
  if (heavy) {
    const auto t0 = Clock::now();
    try {
      first = start_seed(seed, jobs, ledger);
    } catch (const std::exception& e) {
      std::cerr << "setup failed: " << e.what() << std::endl;
    }
    setup_seconds = seconds_since(t0);
  }
  auto need_first = [&]() -> SeedRun& {
    if (!first) throw Error("seed run unavailable");
    return *first;
  };
  run("AC3", "end-to-end watermarking",
      [&] { return end_to_end(need_first(), jobs, setup_seconds); });
  run("AC5", "pruning resistance", [&] { return pruning(need_first(), jobs); });
  run("AC7", "reduction identities", [&] { return reduction_identities(need_first(), ledger); });
  run("AC6", "ablation direction", [&] {
    std::vector<AblationPoint> points = {ablation_seed(need_first(), jobs, ledger)};
    for (std::size_t k = 1; k < seeds; ++k) {
      SeedRun s = start_seed(seed + k, jobs, ledger);
      points.push_back(ablation_seed(s, jobs, ledger));
    }
    return ablation_direction(points);
  });
  run("AC4", "ball constraint", [&] { return ball_constraint(ledger); });

  bool all = true;
  for (const auto& [id, o] : results) all = all && o.pass;
  std::cout << (all ? "ALL PASS" : "SOME FAILED") << " (" << results.size() << " criteria)"
            << std::endl;
  return all ? 0 : 1;
}
