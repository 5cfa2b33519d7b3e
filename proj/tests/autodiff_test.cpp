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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <string>

#include "test_util.hpp"

namespace pregip::ad {
namespace {

using pregip::testing::check_gradient;
using pregip::testing::random_vector;

using Op = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Contracts op(inputs) with a fixed random weight so every output element
// contributes, then checks d/d(input k) for every input against central
// differences.
void expect_op_gradients(const Op& op, const std::vector<Shape>& shapes,
                         std::uint64_t seed, double scale = 1.0,
                         double tol = 1e-6) {
  Rng rng(seed);
  std::vector<std::vector<double>> values;
  for (const auto& s : shapes) values.push_back(random_vector(shape_size(s), scale, rng));

  auto build = [&](const std::vector<std::vector<double>>& vals, Tape& tape,
                   bool grad, std::vector<Tensor>* leaves) {
    std::vector<Tensor> in;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      in.push_back(Tensor::from(shapes[k], vals[k], grad));
    }
    if (leaves) *leaves = in;
    return op(tape, in);
  };
  Tape probe;
  const Tensor out0 = build(values, probe, false, nullptr);
  const std::vector<double> w = random_vector(out0.size(), 1.0, rng);
  auto contract = [&](const Tensor& out) {
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += w[i] * out[i];
    return acc;
  };

  Tape tape;
  std::vector<Tensor> leaves;
  const Tensor out = build(values, tape, true, &leaves);
  const Tensor loss = sum(tape, mul(tape, out, Tensor::from(out.shape(), w)));
  tape.backward(loss);

  for (std::size_t k = 0; k < shapes.size(); ++k) {
    auto f = [&](std::span<const double> x) {
      auto vals = values;
      vals[k].assign(x.begin(), x.end());
      Tape t;
      return contract(build(vals, t, false, nullptr));
    };
    const auto result = check_gradient(f, values[k], leaves[k].grad(), 1000, rng);
    EXPECT_LE(result.worst, tol) << "input " << k;
  }
}

TEST(AutodiffTest, MatmulGradient) {
  expect_op_gradients([](Tape& t, const auto& in) { return matmul(t, in[0], in[1]); },
                      {{4, 5}, {5, 3}}, 1);
}

TEST(AutodiffTest, TransposeGradient) {
  expect_op_gradients([](Tape& t, const auto& in) { return transpose(t, in[0]); },
                      {{3, 4}}, 2);
}

TEST(AutodiffTest, ElementwiseGradients) {
  expect_op_gradients([](Tape& t, const auto& in) { return add(t, in[0], in[1]); },
                      {{3, 4}, {3, 4}}, 3);
  expect_op_gradients([](Tape& t, const auto& in) { return sub(t, in[0], in[1]); },
                      {{3, 4}, {3, 4}}, 4);
  expect_op_gradients([](Tape& t, const auto& in) { return mul(t, in[0], in[1]); },
                      {{3, 4}, {3, 4}}, 5);
  expect_op_gradients([](Tape& t, const auto& in) { return scale(t, in[0], -2.5); },
                      {{7}}, 6);
  expect_op_gradients([](Tape& t, const auto& in) { return add_scalar(t, in[0], 0.3); },
                      {{2, 3}}, 7);
  expect_op_gradients([](Tape& t, const auto& in) { return add_bias(t, in[0], in[1]); },
                      {{5, 3}, {3}}, 8);
}

TEST(AutodiffTest, ActivationGradients) {
  expect_op_gradients([](Tape& t, const auto& in) { return relu(t, in[0]); },
                      {{6, 5}}, 9);
  expect_op_gradients([](Tape& t, const auto& in) { return sigmoid(t, in[0]); },
                      {{6, 5}}, 10);
  expect_op_gradients([](Tape& t, const auto& in) { return tanh(t, in[0]); },
                      {{6, 5}}, 11);
}

TEST(AutodiffTest, ReductionGradients) {
  expect_op_gradients([](Tape& t, const auto& in) { return sum(t, in[0]); },
                      {{4, 3}}, 12);
  expect_op_gradients([](Tape& t, const auto& in) { return mean(t, in[0]); },
                      {{4, 3}}, 13);
  expect_op_gradients([](Tape& t, const auto& in) { return l2_norm_sq(t, in[0]); },
                      {{4, 3}}, 14);
  expect_op_gradients([](Tape& t, const auto& in) { return row_sq_norm(t, in[0]); },
                      {{4, 3}}, 15);
  expect_op_gradients([](Tape& t, const auto& in) { return row_normalize(t, in[0]); },
                      {{4, 3}}, 16);
}

TEST(AutodiffTest, StructuralGradients) {
  expect_op_gradients([](Tape& t, const auto& in) { return concat(t, {in[0], in[1]}); },
                      {{2, 3}, {4, 3}}, 17);
  expect_op_gradients(
      [](Tape& t, const auto& in) { return gather_rows(t, in[0], {2, 0, 2, 1}); },
      {{3, 4}}, 18);
  auto offsets = std::make_shared<const std::vector<std::size_t>>(
      std::vector<std::size_t>{0, 2, 5, 6});
  expect_op_gradients(
      [&](Tape& t, const auto& in) { return segment_mean(t, in[0], offsets); },
      {{6, 3}}, 19);
  expect_op_gradients(
      [&](Tape& t, const auto& in) { return segment_sum(t, in[0], offsets); },
      {{6, 3}}, 20);
  expect_op_gradients(
      [](Tape& t, const auto& in) { return pair_dot(t, in[0], {{0, 1}, {2, 3}, {1, 1}}); },
      {{4, 5}}, 21);
}

TEST(AutodiffTest, NeighborAggregateGradient) {
  // Path 0-1-2 plus the edge 2-3.
  auto adj = std::make_shared<const Adjacency>(
      Adjacency{{0, 1, 3, 5, 6}, {1, 0, 2, 1, 3, 2}});
  expect_op_gradients(
      [&](Tape& t, const auto& in) { return neighbor_aggregate(t, in[0], adj, in[1]); },
      {{4, 3}, {}}, 22);
}

TEST(AutodiffTest, LossGradients) {
  expect_op_gradients(
      [](Tape& t, const auto& in) { return softmax_cross_entropy(t, in[0], {0, 2, 1}); },
      {{3, 4}}, 23);
  expect_op_gradients(
      [](Tape& t, const auto& in) {
        return bce_with_logits(t, in[0], {1.0, 0.0, 1.0, 0.0});
      },
      {{4}}, 24);
}

TEST(AutodiffTest, NeighborAggregateForward) {
  auto adj = std::make_shared<const Adjacency>(Adjacency{{0, 1, 2}, {1, 0}});
  Tape tape;
  const Tensor x = Tensor::from({2, 1}, {1.0, 10.0});
  const Tensor out = neighbor_aggregate(tape, x, adj, Tensor::scalar(0.5));
  EXPECT_DOUBLE_EQ(out[0], 1.5 * 1.0 + 10.0);
  EXPECT_DOUBLE_EQ(out[1], 1.5 * 10.0 + 1.0);
}

TEST(AutodiffTest, SoftmaxCrossEntropyValue) {
  Tape tape;
  const Tensor logits = Tensor::from({1, 2}, {0.0, std::log(3.0)});
  EXPECT_NEAR(softmax_cross_entropy(tape, logits, {1}).item(), -std::log(0.75), 1e-15);
}

TEST(AutodiffTest, GradientsAccumulateAcrossUses) {
  Tape tape;
  const Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  const Tensor y = add(tape, mul(tape, x, x), scale(tape, x, 3.0));
  tape.backward(sum(tape, y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 * 1.0 + 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0 * -2.0 + 3.0);
}

TEST(AutodiffTest, ConstantsAreNotRecorded) {
  Tape tape;
  const Tensor a = Tensor::from({2}, {1.0, 2.0});
  const Tensor b = add(tape, a, a);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(b.requires_grad());
}

TEST(AutodiffTest, ZeroRowNormalizeStaysZero) {
  Tape tape;
  const Tensor x = Tensor::from({2, 2}, {0.0, 0.0, 3.0, 4.0}, true);
  const Tensor y = row_normalize(tape, x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[2], 0.6);
  tape.backward(sum(tape, y));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
}

TEST(AutodiffTest, ShapeErrorsNameTheOp) {
  Tape tape;
  const Tensor a = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
  const Tensor b = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
  try {
    matmul(tape, a, b);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(add(tape, a, Tensor::from({3}, {1, 2, 3})), Error);
  EXPECT_THROW(Tensor::from({2, 2}, {1.0}), Error);
}

}  // namespace
}  // namespace pregip::ad
