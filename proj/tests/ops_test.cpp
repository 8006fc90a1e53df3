/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "panoslot/errors.hpp"
#include "panoslot/ops.hpp"
#include "test_util.hpp"

namespace panoslot {
namespace {

using testing::random_tensor;

Tensor<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor<double>({r, c}, std::move(v));
}

TEST(OpsTest, MatmulIdentityAndDot) {
  Tape<double> tape;
  Var<double> eye = tape.constant(mat(2, 2, {1, 0, 0, 1}));
  Var<double> a = tape.constant(mat(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(matmul(eye, a).value().matrix(), a.value().matrix());
  Var<double> dot = matmul(tape.constant(mat(1, 2, {1, 2})), tape.constant(mat(2, 1, {3, 4})));
  EXPECT_DOUBLE_EQ(dot.value()[0], 11.0);
  EXPECT_THROW(matmul(a, tape.constant(mat(1, 2, {1, 2}))), ShapeError);
}

TEST(OpsTest, SoftmaxClosedForms) {
  Tape<double> tape;
  Var<double> u = softmax(tape.constant(mat(2, 2, {0, 0, 0, 0})), 1);
  for (double v : u.value().data()) EXPECT_DOUBLE_EQ(v, 0.5);
  Var<double> s = softmax(tape.constant(mat(1, 2, {2, 0})), 1);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(s.value()[0], e2 / (e2 + 1), 1e-15);
  EXPECT_NEAR(s.value()[1], 1 / (e2 + 1), 1e-15);
  EXPECT_NEAR(s.value()[0], 0.8808, 1e-4);
}

TEST(OpsTest, SoftmaxSumsToOneAlongEitherAxis) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Tape<double> tape;
    Var<double> x = tape.constant(random_tensor({5, 7}, rng, -30, 30));
    const auto rows = softmax(x, 1).value().matrix().rowwise().sum();
    const auto cols = softmax(x, 0).value().matrix().colwise().sum();
    for (Eigen::Index i = 0; i < rows.size(); ++i) EXPECT_NEAR(rows[i], 1.0, 1e-6);
    for (Eigen::Index i = 0; i < cols.size(); ++i) EXPECT_NEAR(cols[i], 1.0, 1e-6);
  }
}

TEST(OpsTest, LogSoftmaxMatchesLogOfSoftmax) {
  std::mt19937_64 rng(12);
  Tape<double> tape;
  Var<double> x = tape.constant(random_tensor({3, 4}, rng, -5, 5));
  const auto a = log_softmax(x, 0).value().matrix();
  const auto b = softmax(x, 0).value().matrix().array().log().matrix();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OpsTest, LayerNormClosedForms) {
  Tape<double> tape;
  Var<double> gain = tape.constant(Tensor<double>({3}, 1.0));
  Var<double> bias = tape.constant(Tensor<double>({3}, 0.0));
  Var<double> c = layer_norm(tape.constant(mat(1, 3, {5, 5, 5})), gain, bias);
  for (double v : c.value().data()) EXPECT_DOUBLE_EQ(v, 0.0);
  Var<double> g2 = tape.constant(Tensor<double>({2}, 1.0));
  Var<double> b2 = tape.constant(Tensor<double>({2}, 0.0));
  Var<double> y = layer_norm(tape.constant(mat(1, 2, {1, 3})), g2, b2);
  // mean 2, variance 1 -> (x - 2) / sqrt(1 + eps).
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], -s, 1e-12);
  EXPECT_NEAR(y.value()[1], s, 1e-12);
}

TEST(OpsTest, PointwiseConvWithIdentityKernelIsIdentity) {
  std::mt19937_64 rng(13);
  Tape<double> tape;
  Var<double> x = tape.constant(random_tensor({3, 4, 2}, rng));
  Var<double> w = tape.constant(Tensor<double>({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 1}));
  Var<double> b = tape.constant(Tensor<double>({2}, 0.0));
  EXPECT_EQ(conv2d_1x1(x, w, b).value().data()[5], x.value().data()[5]);
  EXPECT_EQ(conv2d_1x1(x, w, b).value().matrix(), x.value().matrix());
}

TEST(OpsTest, Conv3x3MatchesDirectSum) {
  std::mt19937_64 rng(14);
  Tape<double> tape;
  const Tensor<double> xt = random_tensor({5, 6, 2}, rng);
  const Tensor<double> wt = random_tensor({3, 3, 2, 3}, rng);
  const Tensor<double> bt = random_tensor({3}, rng);
  for (std::size_t stride : {1u, 2u}) {
    Var<double> y = conv2d_3x3(tape.constant(xt), tape.constant(wt), tape.constant(bt), stride);
    const std::size_t oh = (5 + 2 - 3) / stride + 1, ow = (6 + 2 - 3) / stride + 1;
    ASSERT_EQ(y.shape(), (Shape{oh, ow, 3}));
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t o = 0; o < 3; ++o) {
          double ref = bt[o];
          for (int dy = 0; dy < 3; ++dy) {
            for (int dx = 0; dx < 3; ++dx) {
              const long yy = long(i * stride) + dy - 1, xx = long(j * stride) + dx - 1;
              if (yy < 0 || xx < 0 || yy >= 5 || xx >= 6) continue;
              for (std::size_t c = 0; c < 2; ++c) {
                ref += xt[(std::size_t(yy) * 6 + std::size_t(xx)) * 2 + c] *
                       wt[((std::size_t(dy) * 3 + std::size_t(dx)) * 2 + c) * 3 + o];
              }
            }
          }
          EXPECT_NEAR(y.value()[(i * ow + j) * 3 + o], ref, 1e-12);
        }
      }
    }
  }
}

TEST(OpsTest, BilinearUpsampleKeepsConstantField) {
  Tape<double> tape;
  Var<double> x = tape.constant(Tensor<double>({2, 2, 3}, 0.75));
  Var<double> y = bilinear_upsample_2x(x);
  ASSERT_EQ(y.shape(), (Shape{4, 4, 3}));
  for (double v : y.value().data()) EXPECT_NEAR(v, 0.75, 1e-15);
}

TEST(OpsTest, BilinearResizeIdentityAtSameSize) {
  std::mt19937_64 rng(15);
  Tape<double> tape;
  Var<double> x = tape.constant(random_tensor({3, 5, 2}, rng));
  EXPECT_LT((bilinear_resize(x, 3, 5).value().matrix() - x.value().matrix()).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(OpsTest, ConcatSliceRoundTrip) {
  std::mt19937_64 rng(16);
  Tape<double> tape;
  Var<double> a = tape.constant(random_tensor({2, 3}, rng));
  Var<double> b = tape.constant(random_tensor({2, 4}, rng));
  Var<double> c = concat<double>({a, b}, 1);
  ASSERT_EQ(c.shape(), (Shape{2, 7}));
  EXPECT_EQ(slice(c, 1, 3, 7).value().matrix(), b.value().matrix());
  Var<double> d = concat<double>({a, a}, 0);
  EXPECT_EQ(slice(d, 0, 2, 4).value().matrix(), a.value().matrix());
}

TEST(OpsTest, PickAndGatherRows) {
  Tape<double> tape;
  Var<double> a = tape.constant(mat(3, 2, {1, 2, 3, 4, 5, 6}));
  Var<double> p = pick(a, {1, 0, 1});
  EXPECT_EQ(p.value()[0], 2.0);
  EXPECT_EQ(p.value()[1], 3.0);
  EXPECT_EQ(p.value()[2], 6.0);
  Var<double> g = gather_rows(a, {2, 2, 0});
  EXPECT_EQ(g.value()[0], 5.0);
  EXPECT_EQ(g.value()[5], 2.0);
  EXPECT_THROW(pick(a, {2, 0, 0}), ShapeError);
}

TEST(OpsTest, ActivationValues) {
  Tape<double> tape;
  Var<double> x = tape.constant(Tensor<double>({3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(relu(x).value()[0], 0.0);
  EXPECT_EQ(relu(x).value()[2], 2.0);
  // GELU(x) = x * Phi(x).
  EXPECT_NEAR(gelu(x).value()[2], 2.0 * 0.5 * (1 + std::erf(2.0 / std::sqrt(2.0))), 1e-15);
  EXPECT_EQ(gelu(x).value()[1], 0.0);
}

TEST(OpsTest, NoNonFiniteOutputsOnBoundedInputs) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    Tape<double> tape;
    Var<double> x = tape.constant(random_tensor({4, 6}, rng, -1e3, 1e3));
    Var<double> g = tape.constant(Tensor<double>({6}, 1.0));
    Var<double> b = tape.constant(Tensor<double>({6}, 0.0));
    EXPECT_NO_THROW({
      softmax(x, 0);
      softmax(x, 1);
      log_softmax(x, 1);
      layer_norm(x, g, b);
      l2_normalize_rows(x);
      gelu(x);
      relu(x);
      matmul(x, transpose(x));
    });
  }
}

TEST(OpsTest, L2NormalizeRowsGivesUnitRows) {
  std::mt19937_64 rng(18);
  Tape<double> tape;
  Var<double> y = l2_normalize_rows(tape.constant(random_tensor({4, 5}, rng)));
  const auto n = y.value().matrix().rowwise().norm();
  for (Eigen::Index i = 0; i < n.size(); ++i) EXPECT_NEAR(n[i], 1.0, 1e-7);
}

}  // namespace
}  // namespace panoslot
