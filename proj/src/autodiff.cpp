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
#include "pregip/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pregip::ad {

namespace {

#if defined(__GLIBC__)
// Tape buffers of a few MB are allocated and freed every step; keep them on
// the heap instead of fresh zeroed pages from mmap.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
  return true;
}();
#endif

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kL2NormSq: return "l2_norm_sq";
    case OpKind::kConcat: return "concat";
    case OpKind::kRowSqNorm: return "row_sq_norm";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kNeighborAggregate: return "neighbor_aggregate";
    case OpKind::kSegmentMean: return "segment_mean";
    case OpKind::kSegmentSum: return "segment_sum";
    case OpKind::kRowNormalize: return "row_normalize";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kPairDot: return "pair_dot";
    case OpKind::kBceWithLogits: return "bce_with_logits";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
  throw Error(std::string(op_name(kind)) + ": shape mismatch " +
              shape_string(a) + " vs " + shape_string(b));
}

[[noreturn]] void shape_error(OpKind kind, const Shape& a,
                              const std::string& what) {
  throw Error(std::string(op_name(kind)) + ": " + what + ", got " +
              shape_string(a));
}

void require_rank2(OpKind kind, const Tensor& t) {
  if (t.rank() != 2) shape_error(kind, t.shape(), "expected rank-2 tensor");
}

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

// C[n,m] += A[n,k] * B[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  MutMap(c, n, m).noalias() += ConstMap(a, n, k) * ConstMap(b, k, m);
}

// C[n,k] += A[n,m] * B[k,m]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n,
             std::size_t m, std::size_t k) {
  MutMap(c, n, k).noalias() += ConstMap(a, n, m) * ConstMap(b, k, m).transpose();
}

// C[k,m] += A[n,k]^T * B[n,m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  MutMap(c, k, m).noalias() += ConstMap(a, n, k).transpose() * ConstMap(b, n, m);
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> values(shape_size(shape), 0.0);
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape.size() > 2) {
    throw Error("tensor: rank > 2 unsupported, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw Error("tensor: shape " + shape_string(shape) + " needs " +
                std::to_string(shape_size(shape)) + " values, got " +
                std::to_string(values.size()));
  }
  auto data = std::make_shared<TensorData>();
  data->shape = std::move(shape);
  data->values = std::move(values);
  data->requires_grad = requires_grad;
  return Tensor(std::move(data));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  return rank() == 2 ? shape()[0] : 1;
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape()[1];
  if (rank() == 1) return shape()[0];
  return 1;
}

double Tensor::item() const {
  if (size() != 1) {
    throw Error("item: tensor is not a scalar, shape " +
                shape_string(shape()));
  }
  return data_->values[0];
}

std::vector<double> Tensor::grad() const {
  if (data_->grad.empty()) return std::vector<double>(size(), 0.0);
  return data_->grad;
}

std::vector<double>& grad_buffer(TensorData& t) {
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  return t.grad;
}

// ------------------------------------------------------------------ Tape

Tensor Tape::record(OpKind kind, std::vector<Tensor> inputs, Shape shape,
                    std::vector<double> values,
                    std::function<void(TapeEntry&)> backward) {
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(),
                  [](const Tensor& t) { return t.requires_grad(); });
  Tensor out = Tensor::from(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    TapeEntry entry{kind, {}, out.data_, std::move(backward)};
    entry.inputs.reserve(inputs.size());
    for (const auto& t : inputs) entry.inputs.push_back(t.data_);
    entries_.push_back(std::move(entry));
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw Error("backward: loss must be scalar, got shape " +
                shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    entries_.clear();
    return;
  }
  grad_buffer(*loss.data_)[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(*it);
  }
  entries_.clear();
}

// ------------------------------------------------------------------- Ops

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_error(OpKind::kMatmul, a.shape(), b.shape());
  }
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<double> out(n * m, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), n, k, m);
  return tape.record(OpKind::kMatmul, {a, b}, {n, m}, std::move(out),
                     [n, k, m](TapeEntry& e) {
                       const auto& ta = *e.inputs[0];
                       const auto& tb = *e.inputs[1];
                       const double* g = e.output->grad.data();
                       if (ta.requires_grad) {
                         gemm_nt(g, tb.values.data(),
                                 grad_buffer(*e.inputs[0]).data(), n, m, k);
                       }
                       if (tb.requires_grad) {
                         gemm_tn(ta.values.data(), g,
                                 grad_buffer(*e.inputs[1]).data(), n, k, m);
                       }
                     });
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank2(OpKind::kTranspose, a);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.at(i, j);
  return tape.record(OpKind::kTranspose, {a}, {m, n}, std::move(out),
                     [n, m](TapeEntry& e) {
                       auto& ga = grad_buffer(*e.inputs[0]);
                       const auto& g = e.output->grad;
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j)
                           ga[i * m + j] += g[j * n + i];
                     });
}

namespace {

Tensor binary_elementwise(Tape& tape, OpKind kind, const Tensor& a,
                          const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(kind, a.shape(), b.shape());
  const std::size_t n = a.size();
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case OpKind::kAdd: out[i] = av[i] + bv[i]; break;
      case OpKind::kSub: out[i] = av[i] - bv[i]; break;
      default: out[i] = av[i] * bv[i]; break;
    }
  }
  return tape.record(kind, {a, b}, a.shape(), std::move(out),
                     [kind, n](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       auto& ta = *e.inputs[0];
                       auto& tb = *e.inputs[1];
                       if (ta.requires_grad) {
                         auto& ga = grad_buffer(ta);
                         for (std::size_t i = 0; i < n; ++i) {
                           ga[i] += kind == OpKind::kMul ? g[i] * tb.values[i]
                                                         : g[i];
                         }
                       }
                       if (tb.requires_grad) {
                         auto& gb = grad_buffer(tb);
                         for (std::size_t i = 0; i < n; ++i) {
                           if (kind == OpKind::kMul) {
                             gb[i] += g[i] * ta.values[i];
                           } else if (kind == OpKind::kSub) {
                             gb[i] -= g[i];
                           } else {
                             gb[i] += g[i];
                           }
                         }
                       }
                     });
}

// Elementwise unary op; `local` maps (input, output) to d out / d in.
template <typename Fwd, typename Local>
Tensor unary(Tape& tape, OpKind kind, const Tensor& a, Fwd fwd, Local local) {
  const std::size_t n = a.size();
  std::vector<double> out(n);
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  return tape.record(kind, {a}, a.shape(), std::move(out),
                     [n, local](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       const auto& x = e.inputs[0]->values;
                       const auto& y = e.output->values;
                       auto& ga = grad_buffer(*e.inputs[0]);
                       for (std::size_t i = 0; i < n; ++i)
                         ga[i] += g[i] * local(x[i], y[i]);
                     });
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, OpKind::kAdd, a, b);
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, OpKind::kSub, a, b);
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, OpKind::kMul, a, b);
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  return unary(
      tape, OpKind::kScale, a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(Tape& tape, const Tensor& a, double offset) {
  return unary(
      tape, OpKind::kAddScalar, a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor relu(Tape& tape, const Tensor& a) {
  return unary(
      tape, OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary(
      tape, OpKind::kSigmoid, a, [](double x) { return sigmoid_value(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary(
      tape, OpKind::kTanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    shape_error(OpKind::kAddBias, x.shape(), bias.shape());
  }
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  return tape.record(OpKind::kAddBias, {x, bias}, x.shape(), std::move(out),
                     [n, m](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       if (e.inputs[0]->requires_grad) {
                         auto& gx = grad_buffer(*e.inputs[0]);
                         for (std::size_t i = 0; i < n * m; ++i) gx[i] += g[i];
                       }
                       if (e.inputs[1]->requires_grad) {
                         auto& gb = grad_buffer(*e.inputs[1]);
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < m; ++j)
                             gb[j] += g[i * m + j];
                       }
                     });
}

Tensor sum(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return tape.record(OpKind::kSum, {a}, {}, {total}, [](TapeEntry& e) {
    const double g = e.output->grad[0];
    for (double& v : grad_buffer(*e.inputs[0])) v += g;
  });
}

Tensor mean(Tape& tape, const Tensor& a) {
  if (a.size() == 0) shape_error(OpKind::kMean, a.shape(), "empty tensor");
  double total = 0.0;
  for (double v : a.values()) total += v;
  const double n = static_cast<double>(a.size());
  return tape.record(OpKind::kMean, {a}, {}, {total / n}, [n](TapeEntry& e) {
    const double g = e.output->grad[0] / n;
    for (double& v : grad_buffer(*e.inputs[0])) v += g;
  });
}

Tensor l2_norm_sq(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v * v;
  return tape.record(OpKind::kL2NormSq, {a}, {}, {total}, [](TapeEntry& e) {
    const double g = e.output->grad[0];
    const auto& x = e.inputs[0]->values;
    auto& ga = grad_buffer(*e.inputs[0]);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * x[i] * g;
  });
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("concat: no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank != 1 && rank != 2) {
    shape_error(OpKind::kConcat, parts[0].shape(), "expected rank 1 or 2");
  }
  const std::size_t cols = rank == 2 ? parts[0].shape()[1] : 1;
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.shape()[1] != cols)) {
      shape_error(OpKind::kConcat, parts[0].shape(), p.shape());
    }
    rows += p.shape()[0];
    sizes.push_back(p.size());
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  Shape shape = rank == 2 ? Shape{rows, cols} : Shape{rows};
  return tape.record(OpKind::kConcat, parts, shape, std::move(out),
                     [sizes](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < sizes.size(); ++p) {
                         if (e.inputs[p]->requires_grad) {
                           auto& gp = grad_buffer(*e.inputs[p]);
                           for (std::size_t i = 0; i < sizes[p]; ++i)
                             gp[i] += g[offset + i];
                         }
                         offset += sizes[p];
                       }
                     });
}

Tensor row_sq_norm(Tape& tape, const Tensor& x) {
  require_rank2(OpKind::kRowSqNorm, x);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += x.at(i, j) * x.at(i, j);
  return tape.record(OpKind::kRowSqNorm, {x}, {n}, std::move(out),
                     [n, m](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       const auto& xv = e.inputs[0]->values;
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j)
                           gx[i * m + j] += 2.0 * xv[i * m + j] * g[i];
                     });
}

Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::vector<std::size_t> index) {
  require_rank2(OpKind::kGatherRows, x);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  std::vector<double> out(index.size() * m);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= n) {
      shape_error(OpKind::kGatherRows, x.shape(),
                  "row index " + std::to_string(index[r]) + " out of range");
    }
    std::copy_n(x.values().begin() + index[r] * m, m, out.begin() + r * m);
  }
  const std::size_t k = index.size();
  return tape.record(OpKind::kGatherRows, {x}, {k, m}, std::move(out),
                     [index = std::move(index), m](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t r = 0; r < index.size(); ++r)
                         for (std::size_t j = 0; j < m; ++j)
                           gx[index[r] * m + j] += g[r * m + j];
                     });
}

Tensor neighbor_aggregate(Tape& tape, const Tensor& x,
                          std::shared_ptr<const Adjacency> adjacency,
                          const Tensor& self_weight) {
  require_rank2(OpKind::kNeighborAggregate, x);
  if (self_weight.size() != 1) {
    shape_error(OpKind::kNeighborAggregate, self_weight.shape(),
                "self weight must be scalar");
  }
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (adjacency->num_nodes() != n) {
    shape_error(OpKind::kNeighborAggregate, x.shape(),
                "adjacency has " + std::to_string(adjacency->num_nodes()) +
                    " nodes");
  }
  const double coef = 1.0 + self_weight.item();
  const auto xv = x.values();
  std::vector<double> out(n * m);
  for (std::size_t v = 0; v < n; ++v) {
    double* row = out.data() + v * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = coef * xv[v * m + j];
    for (std::size_t p = adjacency->offsets[v]; p < adjacency->offsets[v + 1];
         ++p) {
      const double* nb = xv.data() + adjacency->neighbors[p] * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += nb[j];
    }
  }
  return tape.record(
      OpKind::kNeighborAggregate, {x, self_weight}, {n, m}, std::move(out),
      [adjacency, n, m](TapeEntry& e) {
        const auto& g = e.output->grad;
        auto& tx = *e.inputs[0];
        auto& tw = *e.inputs[1];
        if (tx.requires_grad) {
          const double coef = 1.0 + tw.values[0];
          auto& gx = grad_buffer(tx);
          for (std::size_t v = 0; v < n; ++v) {
            const double* gv = g.data() + v * m;
            for (std::size_t j = 0; j < m; ++j) gx[v * m + j] += coef * gv[j];
            // Symmetric adjacency: u receives g_v for every neighbor v.
            for (std::size_t p = adjacency->offsets[v];
                 p < adjacency->offsets[v + 1]; ++p) {
              double* gu = gx.data() + adjacency->neighbors[p] * m;
              for (std::size_t j = 0; j < m; ++j) gu[j] += gv[j];
            }
          }
        }
        if (tw.requires_grad) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n * m; ++i) acc += g[i] * tx.values[i];
          grad_buffer(tw)[0] += acc;
        }
      });
}

namespace {

Tensor segment_pool(Tape& tape, OpKind kind, const Tensor& x,
                    std::shared_ptr<const std::vector<std::size_t>> offsets) {
  require_rank2(kind, x);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  if (offsets->empty() || offsets->back() != n) {
    shape_error(kind, x.shape(), "segment offsets do not cover all rows");
  }
  const std::size_t segments = offsets->size() - 1;
  const bool average = kind == OpKind::kSegmentMean;
  std::vector<double> out(segments * m, 0.0);
  const auto xv = x.values();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = (*offsets)[s], end = (*offsets)[s + 1];
    double* row = out.data() + s * m;
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < m; ++j) row[j] += xv[r * m + j];
    if (average && end > begin) {
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t j = 0; j < m; ++j) row[j] *= inv;
    }
  }
  return tape.record(kind, {x}, {segments, m}, std::move(out),
                     [offsets, segments, m, average](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t s = 0; s < segments; ++s) {
                         const std::size_t begin = (*offsets)[s];
                         const std::size_t end = (*offsets)[s + 1];
                         if (end == begin) continue;
                         const double w =
                             average ? 1.0 / static_cast<double>(end - begin)
                                     : 1.0;
                         for (std::size_t r = begin; r < end; ++r)
                           for (std::size_t j = 0; j < m; ++j)
                             gx[r * m + j] += w * g[s * m + j];
                       }
                     });
}

}  // namespace

Tensor segment_mean(Tape& tape, const Tensor& x,
                    std::shared_ptr<const std::vector<std::size_t>> offsets) {
  return segment_pool(tape, OpKind::kSegmentMean, x, std::move(offsets));
}

Tensor segment_sum(Tape& tape, const Tensor& x,
                   std::shared_ptr<const std::vector<std::size_t>> offsets) {
  return segment_pool(tape, OpKind::kSegmentSum, x, std::move(offsets));
}

Tensor row_normalize(Tape& tape, const Tensor& x) {
  require_rank2(OpKind::kRowNormalize, x);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  std::vector<double> norms(n, 0.0);
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += x.at(i, j) * x.at(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0)
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x.at(i, j) / norms[i];
  }
  return tape.record(OpKind::kRowNormalize, {x}, {n, m}, std::move(out),
                     [norms = std::move(norms), n, m](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       const auto& y = e.output->values;
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t i = 0; i < n; ++i) {
                         if (norms[i] == 0.0) continue;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < m; ++j)
                           dot += g[i * m + j] * y[i * m + j];
                         for (std::size_t j = 0; j < m; ++j)
                           gx[i * m + j] +=
                               (g[i * m + j] - dot * y[i * m + j]) / norms[i];
                       }
                     });
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::vector<std::size_t> labels) {
  require_rank2(OpKind::kSoftmaxCrossEntropy, logits);
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != n || n == 0) {
    shape_error(OpKind::kSoftmaxCrossEntropy, logits.shape(),
                std::to_string(labels.size()) + " labels");
  }
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      shape_error(OpKind::kSoftmaxCrossEntropy, logits.shape(),
                  "label " + std::to_string(labels[i]) + " out of range");
    }
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(logits.at(i, j) - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    loss += std::log(z) + mx - logits.at(i, labels[i]);
  }
  loss /= static_cast<double>(n);
  return tape.record(OpKind::kSoftmaxCrossEntropy, {logits}, {}, {loss},
                     [probs = std::move(probs), labels = std::move(labels), n,
                      c](TapeEntry& e) {
                       const double g = e.output->grad[0] /
                                        static_cast<double>(n);
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           gx[i * c + j] +=
                               g * (probs[i * c + j] -
                                    (j == labels[i] ? 1.0 : 0.0));
                     });
}

Tensor pair_dot(Tape& tape, const Tensor& x,
                std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  require_rank2(OpKind::kPairDot, x);
  const std::size_t n = x.shape()[0], m = x.shape()[1];
  std::vector<double> out(pairs.size(), 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [u, v] = pairs[p];
    if (u >= n || v >= n) {
      shape_error(OpKind::kPairDot, x.shape(), "pair index out of range");
    }
    for (std::size_t j = 0; j < m; ++j) out[p] += x.at(u, j) * x.at(v, j);
  }
  const std::size_t count = pairs.size();
  return tape.record(OpKind::kPairDot, {x}, {count}, std::move(out),
                     [pairs = std::move(pairs), m](TapeEntry& e) {
                       const auto& g = e.output->grad;
                       const auto& xv = e.inputs[0]->values;
                       auto& gx = grad_buffer(*e.inputs[0]);
                       for (std::size_t p = 0; p < pairs.size(); ++p) {
                         const auto [u, v] = pairs[p];
                         for (std::size_t j = 0; j < m; ++j) {
                           gx[u * m + j] += g[p] * xv[v * m + j];
                           gx[v * m + j] += g[p] * xv[u * m + j];
                         }
                       }
                     });
}

Tensor bce_with_logits(Tape& tape, const Tensor& logits,
                       std::vector<double> labels, double clamp) {
  const std::size_t n = logits.size();
  if (labels.size() != n || n == 0) {
    shape_error(OpKind::kBceWithLogits, logits.shape(),
                std::to_string(labels.size()) + " labels");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::clamp(logits[i], -clamp, clamp);
    loss += std::max(s, 0.0) - s * labels[i] + std::log1p(std::exp(-std::abs(s)));
  }
  loss /= static_cast<double>(n);
  return tape.record(OpKind::kBceWithLogits, {logits}, {}, {loss},
                     [labels = std::move(labels), n, clamp](TapeEntry& e) {
                       const double g = e.output->grad[0] /
                                        static_cast<double>(n);
                       const auto& s = e.inputs[0]->values;
                       auto& gs = grad_buffer(*e.inputs[0]);
                       for (std::size_t i = 0; i < n; ++i) {
                         if (s[i] < -clamp || s[i] > clamp) continue;
                         gs[i] += g * (sigmoid_value(s[i]) - labels[i]);
                       }
                     });
}

// ------------------------------------------------------ finite differences

std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error("finite_diff_grad: step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = point[i];
    point[i] = original + h;
    const double up = f(point);
    point[i] = original - h;
    const double down = f(point);
    point[i] = original;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h) {
  const Shape shape = x.shape();
  auto wrapped = [&](std::span<const double> v) {
    return f(Tensor::from(shape, std::vector<double>(v.begin(), v.end())));
  };
  return Tensor::from(shape, finite_diff_grad(wrapped, x.values(), h));
}

}  // namespace pregip::ad
