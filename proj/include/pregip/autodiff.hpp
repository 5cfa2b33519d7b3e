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
#ifndef PREGIP_AUTODIFF_HPP_
#define PREGIP_AUTODIFF_HPP_

// Tape-based reverse-mode automatic differentiation over dense row-major
// double tensors of rank 0, 1 or 2.
//
// A Tensor is a cheap handle onto shared storage. Every op takes the Tape
// explicitly; an op is recorded only when one of its inputs requires a
// gradient. Tapes are single-threaded; independent tapes may live on
// different threads.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pregip/error.hpp"

namespace pregip::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class OpKind {
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kAddBias,
  kRelu,
  kSigmoid,
  kTanh,
  kSum,
  kMean,
  kL2NormSq,
  kConcat,
  kRowSqNorm,
  kGatherRows,
  kNeighborAggregate,
  kSegmentMean,
  kSegmentSum,
  kRowNormalize,
  kSoftmaxCrossEntropy,
  kPairDot,
  kBceWithLogits,
};

const char* op_name(OpKind kind);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t size() const { return data_->values.size(); }
  // Rows/cols of a rank-2 tensor; a rank-1 tensor is treated as one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return data_->values; }
  std::span<double> mutable_values() { return data_->values; }
  double item() const;
  double operator[](std::size_t i) const { return data_->values[i]; }
  double at(std::size_t r, std::size_t c) const {
    return data_->values[r * cols() + c];
  }

  bool requires_grad() const { return data_->requires_grad; }
  bool has_grad() const { return !data_->grad.empty(); }
  // Gradient, or zeros when none has been accumulated.
  std::vector<double> grad() const;
  void zero_grad() { data_->grad.clear(); }

  const std::shared_ptr<TensorData>& impl() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> data) : data_(std::move(data)) {}
  friend class Tape;

  std::shared_ptr<TensorData> data_;
};

struct TapeEntry {
  OpKind kind;
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> output;
  std::function<void(TapeEntry&)> backward;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records `output` as produced by `inputs` if any input requires grad.
  // Returns the output handle, flagged requires_grad accordingly.
  Tensor record(OpKind kind, std::vector<Tensor> inputs, Shape shape,
                std::vector<double> values,
                std::function<void(TapeEntry&)> backward);

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  // accumulate into every requires_grad ancestor. The tape is cleared
  // afterwards.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<TapeEntry> entries_;
};

// Adds `g` into the gradient buffer of `t`, allocating it on first use.
std::vector<double>& grad_buffer(TensorData& t);

// ---- Ops. Shape rules are checked and violations throw pregip::Error
// naming the op kind and the offending shapes.

// [n,k] x [k,m] -> [n,m]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// [n,m] -> [m,n]
Tensor transpose(Tape& tape, const Tensor& a);
// Elementwise on identical shapes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor add_scalar(Tape& tape, const Tensor& a, double offset);
// [n,m] + [m] broadcast over rows.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor tanh(Tape& tape, const Tensor& a);
// Full reductions to a rank-0 scalar. mean fans 1/n back to every element.
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
Tensor l2_norm_sq(Tape& tape, const Tensor& a);
// Stacks rank-2 tensors with equal column count (or rank-1 tensors) along
// the first axis.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);
// [n,m] -> [n], squared L2 norm of every row.
Tensor row_sq_norm(Tape& tape, const Tensor& x);
// [n,m] -> [k,m], rows picked by index (repeats allowed).
Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::vector<std::size_t> index);

// Compressed adjacency of a disjoint union of graphs.
struct Adjacency {
  std::vector<std::size_t> offsets;    // size num_nodes + 1
  std::vector<std::size_t> neighbors;  // both directions of every edge
  std::size_t num_nodes() const {
    return offsets.empty() ? 0 : offsets.size() - 1;
  }
};

// GIN aggregation: out_v = (1 + self_weight) * x_v + sum_{u in N(v)} x_u.
// `self_weight` is a rank-0 tensor.
Tensor neighbor_aggregate(Tape& tape, const Tensor& x,
                          std::shared_ptr<const Adjacency> adjacency,
                          const Tensor& self_weight);
// Row segments [offsets[s], offsets[s+1]) pooled into row s.
Tensor segment_mean(Tape& tape, const Tensor& x,
                    std::shared_ptr<const std::vector<std::size_t>> offsets);
Tensor segment_sum(Tape& tape, const Tensor& x,
                   std::shared_ptr<const std::vector<std::size_t>> offsets);
// Scales every row to unit L2 norm. A zero row stays zero and passes no
// gradient.
Tensor row_normalize(Tape& tape, const Tensor& x);
// Mean over rows of -log softmax(logits_r)[label_r].
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::vector<std::size_t> labels);
// [n,m] -> [p], dot(x[u], x[v]) for every (u, v) pair.
Tensor pair_dot(Tape& tape, const Tensor& x,
                std::vector<std::pair<std::size_t, std::size_t>> pairs);
// Mean binary cross-entropy of logits against 0/1 labels. Logits are
// clamped to [-clamp, clamp]; the clamped region passes no gradient.
Tensor bce_with_logits(Tape& tape, const Tensor& logits,
                       std::vector<double> labels, double clamp = 30.0);

// Central-difference gradient of a scalar function at x.
std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h);
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h);

}  // namespace pregip::ad

#endif  // PREGIP_AUTODIFF_HPP_
