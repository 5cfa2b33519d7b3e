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
#include "pregip/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pregip {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw Error("matrix: " + std::to_string(rows) + "x" +
                std::to_string(cols) + " needs " + std::to_string(rows * cols) +
                " values, got " + std::to_string(data.size()));
  }
}

Matrix Matrix::zeros(std::size_t r, std::size_t c) {
  return Matrix(r, c, std::vector<double>(r * c, 0.0));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

namespace {

void append(std::vector<double>& flat, const std::vector<double>& v) {
  flat.insert(flat.end(), v.begin(), v.end());
}

void take(std::span<const double> flat, std::size_t& pos,
          std::vector<double>& dst) {
  if (pos + dst.size() > flat.size()) throw Error("assign: flat vector too short");
  std::copy_n(flat.begin() + pos, dst.size(), dst.begin());
  pos += dst.size();
}

Matrix glorot(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m = Matrix::zeros(in, out);
  for (double& v : m.data) v = dist(rng);
  return m;
}

ad::Tensor leaf(const std::vector<double>& values, ad::Shape shape,
                bool requires_grad, std::span<const double> shift,
                std::size_t& pos) {
  std::vector<double> v = values;
  if (!shift.empty()) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += shift[pos + i];
  }
  pos += v.size();
  return ad::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

// ------------------------------------------------------------ EncoderParams

std::size_t EncoderParams::output_dim() const {
  return layers.empty() ? input_dim : layers.back().w2.cols;
}

std::size_t EncoderParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    n += l.w1.data.size() + l.b1.size() + l.w2.data.size() + l.b2.size() + 1;
  return n;
}

std::vector<double> EncoderParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (const auto& l : layers) {
    append(flat, l.w1.data);
    append(flat, l.b1);
    append(flat, l.w2.data);
    append(flat, l.b2);
    flat.push_back(l.eps);
  }
  return flat;
}

void EncoderParams::assign(std::span<const double> flat) {
  if (flat.size() != num_parameters()) {
    throw Error("encoder assign: expected " + std::to_string(num_parameters()) +
                " values, got " + std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for (auto& l : layers) {
    take(flat, pos, l.w1.data);
    take(flat, pos, l.b1);
    take(flat, pos, l.w2.data);
    take(flat, pos, l.b2);
    l.eps = flat[pos++];
  }
}

std::vector<bool> EncoderParams::weight_mask() const {
  std::vector<bool> mask;
  mask.reserve(num_parameters());
  for (const auto& l : layers) {
    mask.insert(mask.end(), l.w1.data.size(), true);
    mask.insert(mask.end(), l.b1.size(), false);
    mask.insert(mask.end(), l.w2.data.size(), true);
    mask.insert(mask.end(), l.b2.size(), false);
    mask.push_back(false);
  }
  return mask;
}

void EncoderParams::validate() const {
  std::size_t dim = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.w1.rows != dim || l.b1.size() != l.w1.cols ||
        l.w2.rows != l.w1.cols || l.b2.size() != l.w2.cols) {
      throw Error("encoder: layer " + std::to_string(i) +
                  " dimensions do not chain");
    }
    dim = l.w2.cols;
  }
}

EncoderParams init_encoder(const EncoderArch& arch, Rng& rng) {
  EncoderParams p;
  p.input_dim = arch.input_dim;
  p.readout = arch.readout;
  std::size_t dim = arch.input_dim;
  for (std::size_t i = 0; i < arch.num_layers; ++i) {
    GinLayer l;
    l.w1 = glorot(dim, arch.hidden_dim, rng);
    l.b1.assign(arch.hidden_dim, 0.0);
    l.w2 = glorot(arch.hidden_dim, arch.hidden_dim, rng);
    l.b2.assign(arch.hidden_dim, 0.0);
    p.layers.push_back(std::move(l));
    dim = arch.hidden_dim;
  }
  return p;
}

// --------------------------------------------------------- ClassifierParams

std::size_t ClassifierParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().w.rows;
}

std::size_t ClassifierParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().w.cols;
}

std::size_t ClassifierParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.data.size() + l.b.size();
  return n;
}

std::vector<double> ClassifierParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_parameters());
  for (const auto& l : layers) {
    append(flat, l.w.data);
    append(flat, l.b);
  }
  return flat;
}

void ClassifierParams::assign(std::span<const double> flat) {
  if (flat.size() != num_parameters()) {
    throw Error("classifier assign: size mismatch");
  }
  std::size_t pos = 0;
  for (auto& l : layers) {
    take(flat, pos, l.w.data);
    take(flat, pos, l.b);
  }
}

void ClassifierParams::validate() const {
  if (layers.empty()) throw Error("classifier: needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (!l.b.empty() && l.b.size() != l.w.cols) {
      throw Error("classifier: layer " + std::to_string(i) + " bias size");
    }
    if (i > 0 && l.w.rows != layers[i - 1].w.cols) {
      throw Error("classifier: layer " + std::to_string(i) +
                  " dimensions do not chain");
    }
  }
}

ClassifierParams init_classifier(std::size_t input_dim, std::size_t classes,
                                 const ClassifierArch& arch, Rng& rng) {
  if (arch.depth < 1) throw Error("classifier: depth must be >= 1");
  ClassifierParams p;
  p.activation = arch.activation;
  std::size_t dim = input_dim;
  for (std::size_t i = 0; i < arch.depth; ++i) {
    const std::size_t out = i + 1 == arch.depth ? classes : arch.hidden_dim;
    DenseLayer l;
    l.w = glorot(dim, out, rng);
    if (arch.bias) l.b.assign(out, 0.0);
    p.layers.push_back(std::move(l));
    dim = out;
  }
  return p;
}

// ---------------------------------------------------------------- batching

GraphBatch GraphBatch::build(std::span<const Graph* const> graphs,
                             std::size_t feature_dim) {
  std::size_t total = 0;
  for (const Graph* g : graphs) {
    if (g->feature_dim() != feature_dim) {
      throw Error("encode: graph feature_dim " +
                  std::to_string(g->feature_dim()) + " != encoder input " +
                  std::to_string(feature_dim));
    }
    total += g->num_nodes();
  }
  std::vector<double> features;
  features.reserve(total * feature_dim);
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  offsets->reserve(graphs.size() + 1);
  offsets->push_back(0);
  std::vector<std::size_t> degree(total, 0);
  std::size_t base = 0;
  for (const Graph* g : graphs) {
    features.insert(features.end(), g->features().begin(),
                    g->features().end());
    for (const auto& [u, v] : g->edges()) {
      ++degree[base + u];
      ++degree[base + v];
    }
    base += g->num_nodes();
    offsets->push_back(base);
  }
  auto adj = std::make_shared<ad::Adjacency>();
  adj->offsets.assign(total + 1, 0);
  for (std::size_t v = 0; v < total; ++v)
    adj->offsets[v + 1] = adj->offsets[v] + degree[v];
  adj->neighbors.resize(adj->offsets[total]);
  std::vector<std::size_t> fill(adj->offsets.begin(), adj->offsets.end() - 1);
  base = 0;
  for (const Graph* g : graphs) {
    for (const auto& [u, v] : g->edges()) {
      adj->neighbors[fill[base + u]++] = base + v;
      adj->neighbors[fill[base + v]++] = base + u;
    }
    base += g->num_nodes();
  }
  GraphBatch batch;
  batch.features =
      ad::Tensor::from({total, feature_dim}, std::move(features), false);
  batch.adjacency = std::move(adj);
  batch.node_offsets = std::move(offsets);
  batch.num_graphs = graphs.size();
  return batch;
}

GraphBatch GraphBatch::build(std::span<const Graph> graphs,
                             std::size_t feature_dim) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const Graph& g : graphs) ptrs.push_back(&g);
  return build(std::span<const Graph* const>(ptrs), feature_dim);
}

// ------------------------------------------------------------ GIN forward

BoundEncoder bind_encoder(const EncoderParams& params, bool requires_grad,
                          std::span<const double> shift) {
  if (!shift.empty() && shift.size() != params.num_parameters()) {
    throw Error("bind_encoder: shift has wrong length");
  }
  BoundEncoder b;
  b.params = &params;
  std::size_t pos = 0;
  for (const auto& l : params.layers) {
    b.leaves.push_back(
        leaf(l.w1.data, {l.w1.rows, l.w1.cols}, requires_grad, shift, pos));
    b.leaves.push_back(leaf(l.b1, {l.b1.size()}, requires_grad, shift, pos));
    b.leaves.push_back(
        leaf(l.w2.data, {l.w2.rows, l.w2.cols}, requires_grad, shift, pos));
    b.leaves.push_back(leaf(l.b2, {l.b2.size()}, requires_grad, shift, pos));
    b.leaves.push_back(leaf({l.eps}, {}, requires_grad, shift, pos));
  }
  return b;
}

std::vector<double> collect_grad(const BoundEncoder& bound) {
  std::vector<double> g;
  g.reserve(bound.params->num_parameters());
  for (const auto& t : bound.leaves) append(g, t.grad());
  return g;
}

ad::Tensor node_states(ad::Tape& tape, const BoundEncoder& encoder,
                       const GraphBatch& batch) {
  if (batch.features.cols() != encoder.params->input_dim) {
    throw Error("encode: feature_dim " + std::to_string(batch.features.cols()) +
                " != encoder input " +
                std::to_string(encoder.params->input_dim));
  }
  ad::Tensor h = batch.features;
  const std::size_t num_layers = encoder.params->layers.size();
  for (std::size_t i = 0; i < num_layers; ++i) {
    const ad::Tensor* p = &encoder.leaves[5 * i];
    ad::Tensor agg = ad::neighbor_aggregate(tape, h, batch.adjacency, p[4]);
    ad::Tensor z = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, agg, p[0]), p[1]));
    h = ad::add_bias(tape, ad::matmul(tape, z, p[2]), p[3]);
    if (i + 1 < num_layers) h = ad::relu(tape, h);
  }
  return h;
}

ad::Tensor graph_embeddings(ad::Tape& tape, const BoundEncoder& encoder,
                            const GraphBatch& batch) {
  ad::Tensor h = node_states(tape, encoder, batch);
  return encoder.params->readout == Readout::kMean
             ? ad::segment_mean(tape, h, batch.node_offsets)
             : ad::segment_sum(tape, h, batch.node_offsets);
}

namespace {

std::vector<Embedding> split_rows(const ad::Tensor& t) {
  std::vector<Embedding> out(t.rows());
  const std::size_t m = t.cols();
  for (std::size_t r = 0; r < t.rows(); ++r)
    out[r].assign(t.values().begin() + r * m, t.values().begin() + (r + 1) * m);
  return out;
}

}  // namespace

std::vector<Embedding> encode_all_shifted(std::span<const Graph* const> graphs,
                                          const EncoderParams& params,
                                          std::span<const double> shift) {
  if (graphs.empty()) return {};
  ad::Tape tape;
  const BoundEncoder bound = bind_encoder(params, false, shift);
  const GraphBatch batch = GraphBatch::build(graphs, params.input_dim);
  return split_rows(graph_embeddings(tape, bound, batch));
}

std::vector<Embedding> encode_all(std::span<const Graph> graphs,
                                  const EncoderParams& params) {
  std::vector<const Graph*> ptrs;
  for (const Graph& g : graphs) ptrs.push_back(&g);
  return encode_all_shifted(ptrs, params, {});
}

Embedding encode(const Graph& g, const EncoderParams& params) {
  return encode_all(std::span<const Graph>(&g, 1), params).front();
}

// ------------------------------------------------------------- classifier

BoundClassifier bind_classifier(const ClassifierParams& params,
                                bool requires_grad) {
  BoundClassifier b;
  b.params = &params;
  std::size_t pos = 0;
  for (const auto& l : params.layers) {
    b.leaves.push_back(leaf(l.w.data, {l.w.rows, l.w.cols}, requires_grad, {}, pos));
    if (!l.b.empty())
      b.leaves.push_back(leaf(l.b, {l.b.size()}, requires_grad, {}, pos));
  }
  return b;
}

std::vector<double> collect_grad(const BoundClassifier& bound) {
  std::vector<double> g;
  g.reserve(bound.params->num_parameters());
  for (const auto& t : bound.leaves) append(g, t.grad());
  return g;
}

ad::Tensor classifier_logits(ad::Tape& tape, const BoundClassifier& head,
                             const ad::Tensor& embeddings) {
  const auto& layers = head.params->layers;
  if (layers.empty()) throw Error("classifier: no layers");
  if (embeddings.cols() != layers.front().w.rows) {
    throw Error("classifier: embedding dim " +
                std::to_string(embeddings.cols()) + " != head input " +
                std::to_string(layers.front().w.rows));
  }
  ad::Tensor x = embeddings;
  std::size_t leaf_index = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = ad::matmul(tape, x, head.leaves[leaf_index++]);
    if (!layers[i].b.empty()) x = ad::add_bias(tape, x, head.leaves[leaf_index++]);
    if (i + 1 < layers.size()) {
      switch (head.params->activation) {
        case Activation::kRelu: x = ad::relu(tape, x); break;
        case Activation::kSigmoid: x = ad::sigmoid(tape, x); break;
        case Activation::kTanh: x = ad::tanh(tape, x); break;
      }
    }
  }
  return x;
}

std::vector<double> predict_logits(std::span<const double> embedding,
                                   const ClassifierParams& params) {
  ad::Tape tape;
  const BoundClassifier head = bind_classifier(params, false);
  ad::Tensor e = ad::Tensor::from(
      {1, embedding.size()},
      std::vector<double>(embedding.begin(), embedding.end()));
  ad::Tensor y = classifier_logits(tape, head, e);
  return {y.values().begin(), y.values().end()};
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

// ---------------------------------------------------------- spectral norm

double spectral_norm(const Matrix& w, std::size_t iters, double tol) {
  if (w.rows == 0 || w.cols == 0) throw Error("spectral_norm: empty matrix");
  // Gram matrix on the smaller side, repeatedly squared so that the power
  // iteration below sees the eigenvalue ratio raised to 2^kSquarings.
  constexpr int kSquarings = 16;
  const bool left = w.rows < w.cols;
  const std::size_t n = left ? w.rows : w.cols;
  std::vector<double> gram(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      if (left) {
        for (std::size_t k = 0; k < w.cols; ++k) acc += w(i, k) * w(j, k);
      } else {
        for (std::size_t k = 0; k < w.rows; ++k) acc += w(k, i) * w(k, j);
      }
      gram[i * n + j] = acc;
    }
  }
  auto frobenius = [](const std::vector<double>& m) {
    double s = 0.0;
    for (double a : m) s += a * a;
    return std::sqrt(s);
  };
  if (frobenius(gram) == 0.0) return 0.0;
  std::vector<double> sq(n * n);
  for (int s = 0; s < kSquarings; ++s) {
    const double scale = frobenius(gram);
    for (double& a : gram) a /= scale;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += gram[i * n + k] * gram[k * n + j];
        sq[i * n + j] = acc;
      }
    }
    gram.swap(sq);
  }
  Rng rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n), next(n);
  for (double& x : v) x = normal(rng);
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double a : x) s += a * a;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& a : x) a /= s;
    return s;
  };
  // sigma(v) = ||W v|| (or ||W^T v|| on the left side) for unit v.
  auto sigma_of = [&](const std::vector<double>& x) {
    double s = 0.0;
    const std::size_t m = left ? w.cols : w.rows;
    for (std::size_t r = 0; r < m; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += (left ? w(c, r) : w(r, c)) * x[c];
      s += acc * acc;
    }
    return std::sqrt(s);
  };
  normalize(v);
  double estimate = sigma_of(v);
  for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += gram[i * n + k] * v[k];
      next[i] = acc;
    }
    if (normalize(next) == 0.0) {
      // Start vector orthogonal to the top eigenspace; restart elsewhere.
      for (double& x : next) x = normal(rng);
      normalize(next);
    }
    v.swap(next);
    const double sigma = sigma_of(v);
    const bool converged = tol > 0.0 && std::abs(sigma - estimate) < tol;
    estimate = std::max(estimate, sigma);
    if (converged) break;
  }
  return estimate;
}

double lipschitz_bound(const ClassifierParams& params) {
  double product = 1.0;
  for (const auto& l : params.layers) product *= spectral_norm(l.w);
  return product;
}

// ------------------------------------------------------------- checkpoints

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

const char* readout_name(Readout r) {
  return r == Readout::kMean ? "mean" : "sum";
}

Readout readout_from_name(const std::string& name) {
  if (name == "mean") return Readout::kMean;
  if (name == "sum") return Readout::kSum;
  throw Error("unknown readout '" + name + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw Error("unknown activation '" + name + "'");
}

nlohmann::json encoder_to_json(const EncoderParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    layers.push_back({{"w1", matrix_to_json(l.w1)},
                      {"b1", l.b1},
                      {"w2", matrix_to_json(l.w2)},
                      {"b2", l.b2},
                      {"eps", l.eps}});
  }
  return {{"kind", "gin_encoder"},
          {"input_dim", params.input_dim},
          {"readout", readout_name(params.readout)},
          {"layers", std::move(layers)}};
}

EncoderParams encoder_from_json(const nlohmann::json& j) {
  try {
    EncoderParams p;
    p.input_dim = j.at("input_dim").get<std::size_t>();
    p.readout = readout_from_name(j.at("readout").get<std::string>());
    for (const auto& l : j.at("layers")) {
      GinLayer layer;
      layer.w1 = matrix_from_json(l.at("w1"));
      layer.b1 = l.at("b1").get<std::vector<double>>();
      layer.w2 = matrix_from_json(l.at("w2"));
      layer.b2 = l.at("b2").get<std::vector<double>>();
      layer.eps = l.at("eps").get<double>();
      p.layers.push_back(std::move(layer));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("encoder checkpoint: ") + e.what());
  }
}

nlohmann::json classifier_to_json(const ClassifierParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers)
    layers.push_back({{"w", matrix_to_json(l.w)}, {"b", l.b}});
  return {{"kind", "mlp_head"},
          {"activation", activation_name(params.activation)},
          {"layers", std::move(layers)}};
}

ClassifierParams classifier_from_json(const nlohmann::json& j) {
  try {
    ClassifierParams p;
    p.activation = activation_from_name(j.at("activation").get<std::string>());
    for (const auto& l : j.at("layers")) {
      p.layers.push_back({matrix_from_json(l.at("w")),
                          l.at("b").get<std::vector<double>>()});
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("classifier checkpoint: ") + e.what());
  }
}

void save_encoder(const EncoderParams& params,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << encoder_to_json(params).dump() << '\n';
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return encoder_from_json(j);
}

}  // namespace pregip
