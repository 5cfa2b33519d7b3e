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
#include "pregip/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "pregip/optim.hpp"

namespace pregip {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kPiracy: return "piracy";
    case Provenance::kIndependent: return "independent";
    case Provenance::kUnknown: return "unknown";
  }
  return "unknown";
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "piracy") return Provenance::kPiracy;
  if (name == "independent") return Provenance::kIndependent;
  if (name == "unknown") return Provenance::kUnknown;
  throw Error("unknown provenance '" + name + "'");
}

void SuspectModel::validate() const {
  encoder.validate();
  head.validate();
  if (head.input_dim() != encoder.output_dim()) {
    throw Error("suspect model '" + id + "': head input dim " +
                std::to_string(head.input_dim()) + " != encoder output dim " +
                std::to_string(encoder.output_dim()));
  }
}

nlohmann::json suspect_to_json(const SuspectModel& model) {
  nlohmann::json j = {{"kind", "suspect_model"},
                      {"id", model.id},
                      {"provenance", provenance_name(model.provenance)},
                      {"encoder", encoder_to_json(model.encoder)},
                      {"head", classifier_to_json(model.head)}};
  j["accuracy"] = model.accuracy ? nlohmann::json(*model.accuracy) : nlohmann::json();
  return j;
}

SuspectModel suspect_from_json(const nlohmann::json& j) {
  try {
    if (j.value("kind", "") != "suspect_model") {
      throw Error("model file: kind must be suspect_model");
    }
    SuspectModel m;
    m.id = j.at("id").get<std::string>();
    m.provenance = provenance_from_name(j.at("provenance").get<std::string>());
    m.encoder = encoder_from_json(j.at("encoder"));
    m.head = classifier_from_json(j.at("head"));
    if (j.contains("accuracy") && !j.at("accuracy").is_null()) {
      m.accuracy = j.at("accuracy").get<double>();
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model file: ") + e.what());
  }
}

void save_suspect(const SuspectModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << suspect_to_json(model).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

SuspectModel load_suspect(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  try {
    return suspect_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> predict_classes(const SuspectModel& model,
                                         std::span<const Graph* const> graphs) {
  for (const Graph* g : graphs) {
    if (g->feature_dim() != model.encoder.input_dim) {
      throw Error("predict: graph feature_dim " +
                  std::to_string(g->feature_dim()) + " != encoder input dim " +
                  std::to_string(model.encoder.input_dim));
    }
  }
  const std::vector<Embedding> emb =
      encode_all_shifted(graphs, model.encoder, {});
  std::vector<std::size_t> out;
  out.reserve(emb.size());
  for (const auto& e : emb) out.push_back(argmax(predict_logits(e, model.head)));
  return out;
}

// ------------------------------------------------------------- IP scores

VerificationReport ip_score(std::span<const std::size_t> pred_a,
                            std::span<const std::size_t> pred_b) {
  if (pred_a.size() != pred_b.size()) {
    throw Error("ip_score: prediction lists differ in length");
  }
  if (pred_a.empty()) throw Error("ip_score: empty key");
  VerificationReport r;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred_a.size(); ++i) {
    const bool same = pred_a[i] == pred_b[i];
    r.matches.push_back(same);
    hits += same ? 1 : 0;
  }
  r.ip_score = double(hits) / double(pred_a.size());
  r.degenerate = true;
  for (std::size_t i = 0; i < pred_a.size(); ++i) {
    if (pred_a[i] != pred_a[0] || pred_b[i] != pred_a[0]) r.degenerate = false;
  }
  return r;
}

VerificationReport ip_score(const Predictor& predict, const WatermarkKey& key) {
  if (key.empty()) throw Error("ip_score: empty key");
  std::vector<const Graph*> graphs;
  for (const auto& p : key.pairs) graphs.push_back(&p.first);
  for (const auto& p : key.pairs) graphs.push_back(&p.second);
  const std::vector<std::size_t> pred = predict(graphs);
  if (pred.size() != graphs.size()) {
    throw Error("ip_score: predictor returned the wrong number of labels");
  }
  const std::size_t k = key.size();
  return ip_score(std::span(pred).first(k), std::span(pred).subspan(k));
}

VerificationReport ip_score(const SuspectModel& model, const WatermarkKey& key) {
  return ip_score(
      [&](std::span<const Graph* const> g) { return predict_classes(model, g); },
      key);
}

double ip_gap(double score_piracy, double score_independent) {
  auto check = [](double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error("ip_gap: scores must lie in [0, 1]");
  };
  check(score_piracy);
  check(score_independent);
  return std::abs(score_piracy - score_independent);
}

double ip_roc(std::span<const double> piracy,
              std::span<const double> independent) {
  if (piracy.empty() || independent.empty()) {
    throw Error("ip_roc: both score lists must be non-empty");
  }
  // Count in half-units so the result is a single exact division.
  unsigned long long half_wins = 0;
  for (double p : piracy) {
    for (double q : independent) {
      if (p > q) half_wins += 2;
      else if (p == q) half_wins += 1;
    }
  }
  return double(half_wins) /
         (2.0 * double(piracy.size()) * double(independent.size()));
}

// ----------------------------------------------------------- certificates

namespace {

double top_margin(std::span<const double> logits) {
  const std::size_t best = argmax(logits);
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (i != best) second = std::max(second, logits[i]);
  return logits[best] - second;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void fill_bound(CertificateReport& r, double margin) {
  if (r.lipschitz == 0.0) {
    r.bound = 0.0;
    r.reason = "lipschitz product is 0: head is constant, bound undefined";
    return;
  }
  r.bound = std::max(0.0, margin) / (2.0 * r.lipschitz);
}

}  // namespace

CertificateReport theorem1_certificate(const ClassifierParams& head,
                                       std::span<const double> emb_a,
                                       std::span<const double> emb_b) {
  head.validate();
  if (emb_a.size() != head.input_dim() || emb_b.size() != head.input_dim()) {
    throw Error("theorem1_certificate: embedding dim does not match head");
  }
  CertificateReport r;
  const std::vector<double> la = predict_logits(emb_a, head);
  const std::vector<double> lb = predict_logits(emb_b, head);
  r.class_a = argmax(la);
  r.class_b = argmax(lb);
  r.distance = distance(emb_a, emb_b);
  r.lipschitz = lipschitz_bound(head);
  if (la.size() < 2) {
    r.margin = std::numeric_limits<double>::infinity();
    r.bound = std::numeric_limits<double>::infinity();
    r.certified = true;
    r.reason = "single-class head";
    return r;
  }
  r.margin = top_margin(la);
  fill_bound(r, r.margin);
  if (r.lipschitz != 0.0) {
    r.certified = r.distance < r.bound;
    if (!r.certified) r.reason = "distance not below bound";
  }
  return r;
}

std::pair<double, std::vector<double>> pair_distance(
    const EncoderParams& encoder, const std::pair<Graph, Graph>& pair,
    std::span<const double> shift, bool with_grad) {
  const Graph* graphs[2] = {&pair.first, &pair.second};
  const GraphBatch batch = GraphBatch::build(graphs, encoder.input_dim);
  const bool differentiate = with_grad && encoder.num_parameters() > 0;
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(encoder, differentiate, shift);
  ad::Tensor h = graph_embeddings(tape, bound, batch);
  ad::Tensor d2 = ad::l2_norm_sq(
      tape, ad::sub(tape, ad::gather_rows(tape, h, {0}),
                    ad::gather_rows(tape, h, {1})));
  const double dist = std::sqrt(d2.item());
  std::vector<double> grad;
  if (differentiate) {
    tape.backward(d2);
    grad = collect_grad(bound);
    // d sqrt(s) = ds / (2 sqrt(s)); zero at coincident embeddings.
    const double factor = dist > 0.0 ? 0.5 / dist : 0.0;
    for (double& g : grad) g *= factor;
  } else if (with_grad) {
    grad.assign(encoder.num_parameters(), 0.0);
  }
  return {dist, std::move(grad)};
}

CertificateReport theorem1_certificate(const EncoderParams& encoder,
                                       const ClassifierParams& head,
                                       const std::pair<Graph, Graph>& pair) {
  const Graph* graphs[2] = {&pair.first, &pair.second};
  const std::vector<Embedding> emb = encode_all_shifted(graphs, encoder, {});
  return theorem1_certificate(head, emb[0], emb[1]);
}

CertificateReport corollary1_check(const EncoderParams& encoder,
                                   const ClassifierParams& head,
                                   const std::pair<Graph, Graph>& pair,
                                   double eps, std::size_t num_dirs, Rng& rng,
                                   const PerturbationProbe& probe) {
  if (!(eps >= 0.0)) throw Error("corollary1_check: eps must be >= 0");
  if (num_dirs < 1) throw Error("corollary1_check: num_dirs must be >= 1");
  CertificateReport r = theorem1_certificate(encoder, head, pair);
  r.epsilon = eps;
  r.margin_assumed = !probe.margin_lower.has_value();
  r.margin_lower = probe.margin_lower.value_or(r.margin);
  if (std::isfinite(r.margin_lower)) {
    fill_bound(r, r.margin_lower);
  }
  r.empirical_sup = r.distance;
  r.random_sup = r.distance;
  const std::size_t dim = encoder.num_parameters();
  if (eps > 0.0 && dim > 0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> best_dir(dim, 0.0), dir(dim);
    double best = -1.0;
    for (std::size_t k = 0; k < num_dirs; ++k) {
      for (double& x : dir) x = normal(rng);
      const double norm = l2_norm(dir);
      if (norm == 0.0) continue;
      for (double& x : dir) x *= eps / norm;
      const double d = pair_distance(encoder, pair, dir, false).first;
      if (d > best) {
        best = d;
        best_dir = dir;
      }
    }
    r.random_sup = std::max(r.random_sup, best);
    r.empirical_sup = r.random_sup;
    // Normalized projected ascent on the distance from the best probe.
    std::vector<double> delta = best_dir;
    const double step = eps / double(std::max<std::size_t>(probe.pgd_steps, 1));
    for (std::size_t t = 0; t < probe.pgd_steps; ++t) {
      auto [d, g] = pair_distance(encoder, pair, delta, true);
      r.empirical_sup = std::max(r.empirical_sup, d);
      const double gn = l2_norm(g);
      if (gn == 0.0) break;
      for (std::size_t i = 0; i < dim; ++i) delta[i] += step * g[i] / gn;
      const double dn = l2_norm(delta);
      if (dn > eps)
        for (double& x : delta) x *= eps / dn;
    }
    r.empirical_sup = std::max(
        r.empirical_sup, pair_distance(encoder, pair, delta, false).first);
  }
  r.certified_empirical = r.lipschitz != 0.0 && r.empirical_sup < r.bound;
  return r;
}

Verdict three_sigma_verdict(double score, std::span<const double> independent) {
  if (independent.empty()) throw Error("verdict: empty independent pool");
  double mean = 0.0;
  for (double s : independent) mean += s;
  mean /= double(independent.size());
  double var = 0.0;
  for (double s : independent) var += (s - mean) * (s - mean);
  const double sd = independent.size() > 1
                        ? std::sqrt(var / double(independent.size() - 1))
                        : 0.0;
  Verdict v;
  v.threshold = mean + 3.0 * sd;
  v.piracy_suspect = score >= v.threshold;
  return v;
}

// ----------------------------------------------------------------- reports

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.count = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(var / double(values.size()));
  return m;
}

ScoreSummary summarize(std::span<const ModelScore> models) {
  std::vector<double> ps, is, pa, ia;
  ScoreSummary s;
  for (const auto& m : models) {
    if (m.provenance == Provenance::kPiracy) {
      ps.push_back(m.ip_score);
      if (m.accuracy) pa.push_back(*m.accuracy);
    } else if (m.provenance == Provenance::kIndependent) {
      is.push_back(m.ip_score);
      if (m.accuracy) ia.push_back(*m.accuracy);
    }
    if (m.degenerate) {
      s.caveats.push_back("model " + m.id +
                          " predicts a single class on every key graph; its "
                          "ip_score of 1.0 carries no ownership evidence");
    }
  }
  s.piracy_score = mean_std(ps);
  s.independent_score = mean_std(is);
  s.piracy_accuracy = mean_std(pa);
  s.independent_accuracy = mean_std(ia);
  if (!ps.empty() && !is.empty()) {
    s.ip_gap = ip_gap(s.piracy_score.mean, s.independent_score.mean);
    s.ip_roc = ip_roc(ps, is);
  }
  return s;
}

namespace {

nlohmann::json mean_std_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}};
}

}  // namespace

void write_report(std::span<const ModelScore> models,
                  const ScoreSummary& summary,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& m : models) {
    nlohmann::json j = {{"record", "model"},
                        {"id", m.id},
                        {"provenance", provenance_name(m.provenance)},
                        {"ip_score", m.ip_score},
                        {"degenerate", m.degenerate}};
    if (m.accuracy) j["accuracy"] = *m.accuracy;
    out << j.dump() << '\n';
  }
  nlohmann::json s = {{"record", "summary"},
                      {"piracy_ip_score", mean_std_json(summary.piracy_score)},
                      {"independent_ip_score",
                       mean_std_json(summary.independent_score)},
                      {"piracy_accuracy", mean_std_json(summary.piracy_accuracy)},
                      {"independent_accuracy",
                       mean_std_json(summary.independent_accuracy)},
                      {"caveats", summary.caveats}};
  s["ip_gap"] = summary.ip_gap ? nlohmann::json(*summary.ip_gap) : nlohmann::json();
  s["ip_roc"] = summary.ip_roc ? nlohmann::json(*summary.ip_roc) : nlohmann::json();
  out << s.dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void write_score_csv(std::span<const ModelScore> models,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "model_id,kind,ip_score,accuracy\n";
  // Shortest round-trip representation.
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  for (const auto& m : models) {
    out << m.id << ',' << provenance_name(m.provenance) << ','
        << num(m.ip_score) << ',';
    if (m.accuracy) out << num(*m.accuracy);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace pregip
