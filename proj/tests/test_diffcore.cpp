// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ame/nn.hpp"
#include "ame/ops.hpp"
#include "grad_check.hpp"

namespace ame::diff {
namespace {

using testing::check_gradients;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> v(num_elements(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << i;
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(t.item(), DimensionError);
}

TEST(Tensor, CopiesShareStorage) {
  Tensor a = Tensor::vector({1, 2});
  Tensor b = a;
  b.mutable_data()[0] = 9;
  EXPECT_DOUBLE_EQ(a.data()[0], 9);
  EXPECT_TRUE(a.same_node(b));
  EXPECT_FALSE(a.detach().same_node(a));
}

TEST(DenseLayer, IdentityWeights) {
  DenseLayer layer{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0}), Activation::kIdentity};
  expect_values(forward_dense(layer, Tensor::matrix(1, 2, {1, 2})), {1, 2});
}

TEST(DenseLayer, TanhOfZeroWeights) {
  DenseLayer layer{Tensor::zeros({3, 2}), Tensor::zeros({3}), Activation::kTanh};
  expect_values(forward_dense(layer, Tensor::matrix(2, 2, {4, -7, 0.3, 12})), {0, 0, 0, 0, 0, 0});
}

TEST(DenseLayer, AffineByHand) {
  DenseLayer layer{Tensor::matrix(1, 2, {1, 1}), Tensor::vector({0.5}), Activation::kIdentity};
  expect_values(forward_dense(layer, Tensor::matrix(1, 2, {2, 3})), {5.5});
}

TEST(DenseLayer, ShapeMismatchNamesBothShapes) {
  DenseLayer layer{Tensor::zeros({2, 3}), Tensor::zeros({2}), Activation::kIdentity};
  try {
    forward_dense(layer, Tensor::zeros({4, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
  }
}

TEST(DenseLayer, GlorotInitIsBoundedAndSeeded) {
  Rng a(5), b(5);
  const auto la = make_dense(6, 4, Activation::kRelu, a);
  const auto lb = make_dense(6, 4, Activation::kRelu, b);
  const double limit = std::sqrt(6.0 / 10.0);
  for (std::size_t i = 0; i < la.weights.numel(); ++i) {
    EXPECT_LE(std::fabs(la.weights.data()[i]), limit);
    EXPECT_EQ(la.weights.data()[i], lb.weights.data()[i]);
  }
  for (double v : la.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Softmax, EqualLogitsGiveUniform) {
  expect_values(softmax(Tensor::vector({0, 0, 0, 0}), 0), {0.25, 0.25, 0.25, 0.25});
}

TEST(Softmax, SingleElement) { expect_values(softmax(Tensor::vector({7.3}), 0), {1.0}); }

TEST(Softmax, TwoLogitsByFormula) {
  // e^1 / (e^1 + e^2) = 1 / (1 + e)
  const double e = 2.718281828459045235360287;
  expect_values(softmax(Tensor::vector({1, 2}), 0), {1.0 / (1.0 + e), e / (1.0 + e)}, 1e-15);
}

TEST(Softmax, EmptyAxisThrows) {
  EXPECT_THROW(softmax(Tensor(Shape{0}, {}), 0), DimensionError);
  EXPECT_THROW(softmax(Tensor::vector({1, 2}), 1), DimensionError);
}

TEST(Softmax, ShiftInvariantAndOnSimplex) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.index(6);
    std::vector<double> logits(k);
    for (auto& v : logits) v = rng.uniform(-30, 30);
    const double shift = rng.uniform(-500, 500);
    std::vector<double> shifted(logits);
    for (auto& v : shifted) v += shift;
    const auto a = softmax(Tensor::vector(logits), 0);
    const auto b = softmax(Tensor::vector(shifted), 0);
    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_GT(a.data()[i], 0.0);
      EXPECT_NEAR(a.data()[i], b.data()[i], 1e-9);
      total += a.data()[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Softmax, RowsOfAMatrix) {
  const auto s = softmax(Tensor::matrix(2, 2, {0, 0, 0, std::log(3.0)}), 1);
  expect_values(s, {0.5, 0.5, 0.25, 0.75}, 1e-15);
}

TEST(Loss, MaeExamples) {
  EXPECT_DOUBLE_EQ(loss_mae(Tensor::vector({1, 2}), Tensor::vector({1, 2})).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_mae(Tensor::vector({1, 3}), Tensor::vector({0, 0})).item(), 2.0);
  EXPECT_DOUBLE_EQ(loss_mae(Tensor::vector({-1}), Tensor::vector({1})).item(), 2.0);
  EXPECT_THROW(loss_mae(Tensor::vector({1, 2}), Tensor::vector({1})), DimensionError);
}

TEST(Loss, CrossEntropyExamples) {
  EXPECT_LE(loss_cross_entropy(Tensor::vector({0, 1, 0}), Tensor::vector({0, 1, 0})).item(), 1e-11);
  for (std::size_t k : {2, 3, 7}) {
    const auto uniform = Tensor::full({k}, 1.0 / static_cast<double>(k));
    std::vector<double> target(k, 0.0);
    target[k - 1] = 1.0;
    EXPECT_NEAR(loss_cross_entropy(uniform, Tensor::vector(target)).item(),
                std::log(static_cast<double>(k)), 1e-10);
  }
  EXPECT_NEAR(loss_cross_entropy(Tensor::vector({0.9, 0.1}), Tensor::vector({1, 0})).item(),
              -std::log(0.9), 1e-11);
  EXPECT_THROW(loss_cross_entropy(Tensor::vector({1.2, -0.2}), Tensor::vector({1, 0})),
               NumericalError);
  EXPECT_THROW(loss_cross_entropy(Tensor::vector({0.5, 0.5}), Tensor::vector({1, 0, 0})),
               DimensionError);
}

TEST(Loss, CrossEntropyAveragesOverBatch) {
  const auto probs = Tensor::matrix(2, 2, {0.9, 0.1, 0.5, 0.5});
  const auto targets = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(loss_cross_entropy(probs, targets).item(), -(std::log(0.9) + std::log(0.5)) / 2, 1e-11);
}

TEST(Backward, LinearCase) {
  Tensor w = Tensor::vector({0.3, -2.0, 5.0}, true);
  const Tensor x = Tensor::vector({1.5, 2.5, -4.0});
  backward(sum(mul(w, x)));
  expect_values(Tensor::vector(std::vector<double>(w.grad().begin(), w.grad().end())), {1.5, 2.5, -4.0});
}

TEST(Backward, UnusedParameterGetsZero) {
  Tensor w = Tensor::vector({1, 2}, true);
  Tensor v = Tensor::vector({3}, true);
  const Parameter params[] = {{"w", w}, {"v", v}};
  const auto check = check_gradients(params, [&] { return sum(mul(v, v)); });
  EXPECT_FALSE(w.has_grad() && (w.grad()[0] != 0.0 || w.grad()[1] != 0.0));
  EXPECT_LT(check.max_rel_error, 1e-6);
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor w = Tensor::scalar(2.0, true);
  const Tensor loss = mul(w, w);
  backward(loss);
  backward(loss);
  EXPECT_DOUBLE_EQ(w.grad()[0], 8.0);
  w.zero_grad();
  EXPECT_FALSE(w.has_grad());
}

TEST(Backward, NonScalarLossThrows) {
  Tensor w = Tensor::vector({1, 2}, true);
  EXPECT_THROW(backward(mul(w, w)), DimensionError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor w = Tensor::vector({1, 2}, true);
  Tensor y;
  {
    const NoGradGuard guard;
    y = sum(mul(w, w));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(NoGradGuard::grad_enabled());
}

TEST(Gradients, LeavesOtherBuffersAlone) {
  Tensor w = Tensor::vector({1, 2}, true);
  Tensor x = Tensor::vector({3, 4}, true);
  backward(sum(mul(w, w)));  // w.grad = [2, 4]
  const Tensor inputs[] = {x};
  const auto g = gradients(sum(mul(w, x)), inputs);
  EXPECT_EQ(g[0], (std::vector<double>{1, 2}));
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), (std::vector<double>{2, 4}));
  EXPECT_FALSE(x.has_grad());
}

// Every differentiable op against central differences on random inputs.
TEST(GradCheck, ElementwiseOps) {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  Tensor pos = add_scalar(abs(random_tensor({3, 4}, rng, false)), 0.5).detach();
  pos.set_requires_grad(true);
  const Parameter params[] = {{"a", a}, {"b", b}, {"pos", pos}};
  const auto check = check_gradients(params, [&] {
    Tensor t = add(mul(tanh(a), sigmoid(b)), scale(exp(sub(a, b)), 0.3));
    t = add(t, log(pos, 0.1));
    t = add(t, mul(relu(add_scalar(a, 0.05)), b));
    return mean(mul(t, t));
  });
  EXPECT_LT(check.max_rel_error, 1e-6) << check.worst;
}

TEST(GradCheck, MatrixOps) {
  Rng rng(2);
  Tensor x = random_tensor({3, 4}, rng), w = random_tensor({2, 4}, rng), bias = random_tensor({2}, rng);
  Tensor m = random_tensor({4, 3}, rng), v = random_tensor({2}, rng);
  const Parameter params[] = {{"x", x}, {"w", w}, {"bias", bias}, {"m", m}, {"v", v}};
  const auto check = check_gradients(params, [&] {
    const Tensor y = linear(x, w, bias);                  // [3 x 2]
    const Tensor p = matmul(x, m);                        // [3 x 3]
    const Tensor s = softmax(p, 1);
    const Tensor col = row_dot(y, v);                     // [3 x 1]
    const Tensor parts[] = {slice_cols(s, 1, 3), mul_col(y, col), broadcast_cols(col, 2)};
    const Tensor cat = concat_cols(parts);                // [3 x 6]
    const std::size_t pick[] = {5, 0, 3};
    const Tensor g = gather_cols(cat, pick);
    return add(sum(mul(g, g)), mean(row_sum(reshape(cat, {6, 3}))));
  });
  EXPECT_LT(check.max_rel_error, 1e-6) << check.worst;
}

TEST(GradCheck, Losses) {
  Rng rng(3);
  Tensor pred = random_tensor({4, 3}, rng);
  const Tensor target = random_tensor({4, 3}, rng, false);
  const Tensor onehot = Tensor::matrix(4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0.2, 0.3, 0.5});
  const Parameter params[] = {{"pred", pred}};
  const auto check = check_gradients(params, [&] {
    const Tensor probs = softmax(pred, 1);
    return add(add(loss_mae(pred, target), loss_mse(pred, target)),
               add(loss_cross_entropy(probs, onehot), mean(cross_entropy_rows(probs, onehot))));
  });
  EXPECT_LT(check.max_rel_error, 1e-6) << check.worst;
}

TEST(GradCheck, SmallMlpParameters) {
  Rng rng(4);
  const auto l1 = make_dense(3, 5, Activation::kTanh, rng);
  const auto l2 = make_dense(5, 2, Activation::kSoftmax, rng);
  const Tensor x = random_tensor({6, 3}, rng, false);
  const Tensor y = Tensor::matrix(6, 2, {1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1});
  const Parameter params[] = {{"l1.w", l1.weights}, {"l1.b", l1.bias}, {"l2.w", l2.weights}, {"l2.b", l2.bias}};
  const auto check = check_gradients(
      params, [&] { return loss_cross_entropy(forward_dense(l2, forward_dense(l1, x)), y); });
  EXPECT_LT(check.max_rel_error, 1e-6) << check.worst;
  EXPECT_EQ(check.checked, 15u + 5u + 10u + 2u);
}

TEST(Optimizer, SgdRule) {
  Tensor w = Tensor::scalar(1.0, true);
  w.node()->ensure_grad()[0] = 2.0;
  Optimizer sgd({OptimizerKind::kSgd, 0.1});
  const Parameter params[] = {{"w", w}};
  sgd.step(params);
  EXPECT_NEAR(w.item(), 0.8, 1e-15);
  w.node()->grad.assign(1, 0.0);
  sgd.step(params);
  EXPECT_NEAR(w.item(), 0.8, 1e-15);
}

TEST(Optimizer, AdamFirstStepByHand) {
  // m = (1-b1) g, v = (1-b2) g^2, bias-corrected to g and g^2, so the step is
  // -lr * g / (|g| + eps).
  for (double g : {3.0, -0.25}) {
    Tensor w = Tensor::scalar(1.0, true);
    w.node()->ensure_grad()[0] = g;
    Optimizer adam({OptimizerKind::kAdam, 0.01});
    const Parameter params[] = {{"w", w}};
    adam.step(params);
    EXPECT_NEAR(w.item(), 1.0 - 0.01 * g / (std::fabs(g) + 1e-8), 1e-15);
    EXPECT_EQ(std::signbit(w.item() - 1.0), !std::signbit(g));
  }
}

TEST(Optimizer, AdamZeroGradFromFreshState) {
  Tensor w = Tensor::vector({0.5, -1.5}, true);
  w.node()->ensure_grad();
  Optimizer adam({OptimizerKind::kAdam, 0.1});
  const Parameter params[] = {{"w", w}};
  adam.step(params);
  EXPECT_EQ(w.data()[0], 0.5);
  EXPECT_EQ(w.data()[1], -1.5);
}

TEST(Optimizer, MissingGradNamesParameter) {
  Tensor w = Tensor::scalar(1.0, true);
  Optimizer sgd({OptimizerKind::kSgd, 0.1});
  const Parameter params[] = {{"expert.0.weight", w}};
  try {
    sgd.step(params);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("expert.0.weight"), std::string::npos);
  }
}

TEST(Rng, ForkedStreamsAreReproducible) {
  const Rng root(42);
  Rng a = root.fork(7), b = root.fork(7), c = root.fork(8);
  const double x = a.normal();
  EXPECT_EQ(x, b.normal());
  EXPECT_NE(x, c.normal());
}

}  // namespace
}  // namespace ame::diff
