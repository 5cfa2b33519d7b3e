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
#ifndef PREGIP_ENCODER_HPP_
#define PREGIP_ENCODER_HPP_

// GIN graph encoder, MLP classification head and the spectral machinery
// behind the Lipschitz consistency certificate.
//
// Parameters are plain value types. To differentiate, bind them to a tape
// (bind_encoder / bind_classifier), which creates leaf tensors in a fixed
// flat order that matches flatten()/assign().

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pregip/autodiff.hpp"
#include "pregip/graphs.hpp"
#include "pregip/rng.hpp"

namespace pregip {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);
  static Matrix zeros(std::size_t r, std::size_t c);
  static Matrix identity(std::size_t n);

  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using Embedding = std::vector<double>;

enum class Readout { kMean, kSum };

// One GIN layer: h_v <- MLP((1 + eps) h_v + sum_{u in N(v)} h_u), where
// MLP(x) = relu(x W1 + b1) W2 + b2.
struct GinLayer {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  double eps = 0.0;

  friend bool operator==(const GinLayer&, const GinLayer&) = default;
};

struct EncoderParams {
  std::size_t input_dim = 0;
  Readout readout = Readout::kMean;
  std::vector<GinLayer> layers;  // a ReLU separates consecutive layers

  std::size_t output_dim() const;
  std::size_t num_parameters() const;
  // Flat order: per layer w1, b1, w2, b2, eps.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  // True at flat positions that belong to a weight matrix (w1/w2).
  std::vector<bool> weight_mask() const;
  // Throws if the layer dimensions do not chain.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct EncoderArch {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  Readout readout = Readout::kMean;
};

// Glorot-uniform weights, zero biases, eps = 0.
EncoderParams init_encoder(const EncoderArch& arch, Rng& rng);

enum class Activation { kRelu, kSigmoid, kTanh };

struct DenseLayer {
  Matrix w;                // [in, out]
  std::vector<double> b;   // empty when the head is bias-free

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// y = W_K phi(... phi(W_1 e + b_1) ...) + b_K with a 1-Lipschitz phi.
struct ClassifierParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kRelu;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_parameters() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) =
      default;
};

struct ClassifierArch {
  std::size_t depth = 1;  // K
  std::size_t hidden_dim = 32;
  Activation activation = Activation::kRelu;
  bool bias = true;
};

ClassifierParams init_classifier(std::size_t input_dim, std::size_t classes,
                                 const ClassifierArch& arch, Rng& rng);

// Disjoint union of graphs laid out for batched message passing.
struct GraphBatch {
  ad::Tensor features;  // [total_nodes, feature_dim]
  std::shared_ptr<const ad::Adjacency> adjacency;
  std::shared_ptr<const std::vector<std::size_t>> node_offsets;
  std::size_t num_graphs = 0;

  static GraphBatch build(std::span<const Graph* const> graphs,
                          std::size_t feature_dim);
  static GraphBatch build(std::span<const Graph> graphs,
                          std::size_t feature_dim);
};

struct BoundEncoder {
  const EncoderParams* params = nullptr;
  std::vector<ad::Tensor> leaves;  // flat order, see EncoderParams
};

// Leaves hold params (+ shift, when given) and require grad when asked.
BoundEncoder bind_encoder(const EncoderParams& params, bool requires_grad,
                          std::span<const double> shift = {});
// Concatenated leaf gradients in flat order.
std::vector<double> collect_grad(const BoundEncoder& bound);

ad::Tensor node_states(ad::Tape& tape, const BoundEncoder& encoder,
                       const GraphBatch& batch);
// [num_graphs, output_dim]
ad::Tensor graph_embeddings(ad::Tape& tape, const BoundEncoder& encoder,
                            const GraphBatch& batch);

Embedding encode(const Graph& g, const EncoderParams& params);
std::vector<Embedding> encode_all(std::span<const Graph> graphs,
                                  const EncoderParams& params);
// Embeddings under parameters theta + shift.
std::vector<Embedding> encode_all_shifted(std::span<const Graph* const> graphs,
                                          const EncoderParams& params,
                                          std::span<const double> shift);

struct BoundClassifier {
  const ClassifierParams* params = nullptr;
  std::vector<ad::Tensor> leaves;
};

BoundClassifier bind_classifier(const ClassifierParams& params,
                                bool requires_grad);
std::vector<double> collect_grad(const BoundClassifier& bound);
// [n, d] embeddings -> [n, c] logits
ad::Tensor classifier_logits(ad::Tape& tape, const BoundClassifier& head,
                             const ad::Tensor& embeddings);

std::vector<double> predict_logits(std::span<const double> embedding,
                                   const ClassifierParams& params);
// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

// Largest singular value by power iteration from a seeded start vector,
// run on the Gram matrix W^T W (or W W^T) raised to the 2^16-th power by
// repeated squaring. Runs `iters` steps; a positive `tol` stops early once
// successive estimates differ by less than it, which can stall on a start
// vector close to the second singular direction.
double spectral_norm(const Matrix& w, std::size_t iters = 500,
                     double tol = 0.0);
// prod_i ||W_i||_2, an upper bound on the head's Lipschitz constant.
double lipschitz_bound(const ClassifierParams& params);

// Checkpoints. Values are written with round-trip precision.
nlohmann::json encoder_to_json(const EncoderParams& params);
EncoderParams encoder_from_json(const nlohmann::json& j);
nlohmann::json classifier_to_json(const ClassifierParams& params);
ClassifierParams classifier_from_json(const nlohmann::json& j);
void save_encoder(const EncoderParams& params,
                  const std::filesystem::path& path);
EncoderParams load_encoder(const std::filesystem::path& path);

const char* readout_name(Readout r);
Readout readout_from_name(const std::string& name);
const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

}  // namespace pregip

#endif  // PREGIP_ENCODER_HPP_
