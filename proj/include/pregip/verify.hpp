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
#ifndef PREGIP_VERIFY_HPP_
#define PREGIP_VERIFY_HPP_

// Black-box ownership verification and the Lipschitz consistency
// certificates for watermark pairs.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pregip/encoder.hpp"
#include "pregip/graphs.hpp"
#include "pregip/rng.hpp"
#include "pregip/watermark.hpp"

namespace pregip {

enum class Provenance { kPiracy, kIndependent, kUnknown };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

struct SuspectModel {
  std::string id;
  EncoderParams encoder;
  ClassifierParams head;
  Provenance provenance = Provenance::kUnknown;
  std::optional<double> accuracy;  // held-out accuracy, when known

  void validate() const;
};

// Model file: encoder and head checkpoints plus id, provenance, accuracy.
nlohmann::json suspect_to_json(const SuspectModel& model);
SuspectModel suspect_from_json(const nlohmann::json& j);
void save_suspect(const SuspectModel& model, const std::filesystem::path& path);
SuspectModel load_suspect(const std::filesystem::path& path);

// Predicted classes of the model on each graph (argmax, lowest index wins).
std::vector<std::size_t> predict_classes(const SuspectModel& model,
                                         std::span<const Graph* const> graphs);

// Label-only access to a suspect: graphs in, predicted classes out.
using Predictor = std::function<std::vector<std::size_t>(
    std::span<const Graph* const> graphs)>;

struct VerificationReport {
  double ip_score = 0.0;
  std::vector<bool> matches;  // one per key pair
  // Every key graph received the same class; a score of 1.0 then says
  // nothing about provenance.
  bool degenerate = false;
  std::optional<double> ip_gap;
  std::optional<double> ip_roc;
};

// Fraction of key pairs whose two graphs receive the same predicted class.
VerificationReport ip_score(const Predictor& predict, const WatermarkKey& key);
VerificationReport ip_score(const SuspectModel& model, const WatermarkKey& key);
// Same, from precomputed predictions for the a-side and b-side graphs.
VerificationReport ip_score(std::span<const std::size_t> pred_a,
                            std::span<const std::size_t> pred_b);

// |piracy - independent|; both scores must lie in [0, 1].
double ip_gap(double score_piracy, double score_independent);
// P(piracy > independent) + 0.5 P(equal) over all cross pairs.
double ip_roc(std::span<const double> piracy,
              std::span<const double> independent);

struct CertificateReport {
  double margin = 0.0;        // s_a: top-1 minus top-2 logit on graph a
  double lipschitz = 0.0;     // prod_i ||W_i||_2
  double distance = 0.0;      // ||f_E(G_a) - f_E(G_b)||_2
  double bound = 0.0;         // s_a / (2 L); 0 when L == 0
  bool certified = false;     // distance < bound
  std::string reason;         // set when not certifiable
  std::size_t class_a = 0;
  std::size_t class_b = 0;

  // Perturbation check only.
  double epsilon = 0.0;
  double margin_lower = 0.0;    // s_a lower bound used for the bound
  bool margin_assumed = false;  // true when margin_lower defaulted to s_a
  double empirical_sup = 0.0;   // max distance found in the eps-ball
  double random_sup = 0.0;      // max over the random directions alone
  bool certified_empirical = false;
};

// Certificate for a pair of embeddings under `head`.
CertificateReport theorem1_certificate(const ClassifierParams& head,
                                       std::span<const double> emb_a,
                                       std::span<const double> emb_b);
CertificateReport theorem1_certificate(const EncoderParams& encoder,
                                       const ClassifierParams& head,
                                       const std::pair<Graph, Graph>& pair);

struct PerturbationProbe {
  std::size_t pgd_steps = 20;
  // Caller-supplied lower bound on s_a over the ball; defaults to s_a at
  // the unperturbed parameters.
  std::optional<double> margin_lower;
};

// Empirical version of the perturbed certificate: the sup over the
// eps-ball of the pair distance is approximated from below by num_dirs
// random directions scaled to eps followed by projected gradient ascent
// started at the best of them. Heuristic by construction.
CertificateReport corollary1_check(const EncoderParams& encoder,
                                   const ClassifierParams& head,
                                   const std::pair<Graph, Graph>& pair,
                                   double eps, std::size_t num_dirs, Rng& rng,
                                   const PerturbationProbe& probe = {});

// ||f_E(a; theta + shift) - f_E(b; theta + shift)||_2 and its gradient
// w.r.t. shift (empty when !with_grad).
std::pair<double, std::vector<double>> pair_distance(
    const EncoderParams& encoder, const std::pair<Graph, Graph>& pair,
    std::span<const double> shift, bool with_grad);

struct Verdict {
  double threshold = 0.0;  // independent mean + 3 std
  bool piracy_suspect = false;
};

// Flags `score` when it reaches the independent pool's mean plus three
// standard deviations (sample std; 0 for a single-model pool).
Verdict three_sigma_verdict(double score, std::span<const double> independent);

struct ModelScore {
  std::string id;
  Provenance provenance = Provenance::kUnknown;
  double ip_score = 0.0;
  std::optional<double> accuracy;
  bool degenerate = false;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population std
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

struct ScoreSummary {
  MeanStd piracy_score;
  MeanStd independent_score;
  MeanStd piracy_accuracy;
  MeanStd independent_accuracy;
  std::optional<double> ip_gap;  // between mean scores
  std::optional<double> ip_roc;
  std::vector<std::string> caveats;
};

ScoreSummary summarize(std::span<const ModelScore> models);

// One JSON record per model, then a summary record.
void write_report(std::span<const ModelScore> models,
                  const ScoreSummary& summary,
                  const std::filesystem::path& path);
// Header model_id,kind,ip_score,accuracy.
void write_score_csv(std::span<const ModelScore> models,
                     const std::filesystem::path& path);

}  // namespace pregip

#endif  // PREGIP_VERIFY_HPP_
