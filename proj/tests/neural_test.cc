// Copyright 2026 The seqreward Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqreward/neural.h"

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "seqreward/errors.h"

namespace seqreward::nn {
namespace {

// Central finite differences of a scalar function over every entry of x.
Matrix NumericGradient(const std::function<double()>& f, Matrix& x,
                       double step = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + step;
    const double plus = f();
    x.data()[i] = keep - step;
    const double minus = f();
    x.data()[i] = keep;
    g.data()[i] = (plus - minus) / (2.0 * step);
  }
  return g;
}

double MaxRelativeError(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

Matrix RandomMatrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = scale * StandardNormal(rng);
  return m;
}

TEST(DenseNetTest, ZeroWeightsGiveZeroOutput) {
  Rng rng(1);
  DenseNet net("z", {3, 2}, {Activation::kIdentity}, rng);
  net.weight(0).value.setZero();
  Matrix x = RandomMatrix(4, 3, rng);
  EXPECT_TRUE(net.Forward(x).isZero());
}

TEST(DenseNetTest, ScalarRelu) {
  Rng rng(1);
  DenseNet net("s", {1, 1}, {Activation::kRelu}, rng);
  net.weight(0).value(0, 0) = 1.7;
  Matrix x(1, 1);
  x(0, 0) = 2.0;
  EXPECT_DOUBLE_EQ(net.Forward(x)(0, 0), 3.4);
}

TEST(DenseNetTest, ShapeMismatchIsContractViolation) {
  Rng rng(1);
  DenseNet net("s", {3, 2}, {Activation::kRelu}, rng);
  EXPECT_THROW(net.Forward(Matrix::Zero(2, 4)), ContractViolation);
}

class DenseNetGradientTest : public ::testing::TestWithParam<Activation> {};

TEST_P(DenseNetGradientTest, MatchesFiniteDifferences) {
  Rng rng(42);
  DenseNet net("g", {8, 16, 4}, {Activation::kRelu, GetParam()}, rng);
  // Nonzero biases so ReLU kinks are unlikely to sit at the probe points.
  for (Parameter* p : net.Parameters()) {
    if (!p->is_weight) p->value = RandomMatrix(1, p->value.cols(), rng, 0.1);
  }
  Matrix x = RandomMatrix(5, 8, rng);
  Matrix proj = RandomMatrix(5, 4, rng);
  auto loss = [&]() { return (net.Forward(x).array() * proj.array()).sum(); };

  NetCache cache;
  net.ZeroGrad();
  net.Forward(x, &cache);
  Matrix grad_x = net.Backward(cache, proj);

  EXPECT_LT(MaxRelativeError(grad_x, NumericGradient(loss, x)), 1e-4);
  for (Parameter* p : net.Parameters()) {
    Matrix analytic = p->grad;
    EXPECT_LT(MaxRelativeError(analytic, NumericGradient(loss, p->value)), 1e-4)
        << p->name;
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, DenseNetGradientTest,
                         ::testing::Values(Activation::kIdentity,
                                           Activation::kSigmoid,
                                           Activation::kSoftmax,
                                           Activation::kRelu));

TEST(BceLossTest, ExactMatchIsNearZero) {
  Matrix t(2, 3);
  t << 1, 0, 1, 0, 0, 1;
  EXPECT_NEAR(BceLoss(t, t).value, 0.0, 1e-6);
}

TEST(BceLossTest, HalfEverywhereIsLogTwo) {
  Matrix t(3, 2);
  t << 1, 0, 0, 1, 1, 1;
  EXPECT_NEAR(BceLoss(Matrix::Constant(3, 2, 0.5), t).value, std::log(2.0),
              1e-12);
}

TEST(BceLossTest, AgreesWithScalarLoopAndFiniteDifferences) {
  Rng rng(3);
  Matrix p = Sigmoid(RandomMatrix(6, 5, rng));
  Matrix t(6, 5);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = Uniform01(rng) < 0.5;
  double oracle = 0.0;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 5; ++c) {
      const double q = std::min(std::max(p(r, c), 1e-7), 1.0 - 1e-7);
      oracle += -(t(r, c) * std::log(q) + (1 - t(r, c)) * std::log(1 - q));
    }
  }
  oracle /= 30.0;
  LossResult r = BceLoss(p, t);
  EXPECT_NEAR(r.value, oracle, 1e-10);
  EXPECT_LT(MaxRelativeError(r.grad, NumericGradient([&] { return BceLoss(p, t).value; }, p)),
            1e-4);
  EXPECT_GE(r.value, 0.0);
}

TEST(SoftmaxCrossEntropyTest, UniformLogitsGiveLogK) {
  Matrix logits = Matrix::Constant(2, 7, 0.3);
  EXPECT_NEAR(SoftmaxCrossEntropy(logits, {0, 6}).value, std::log(7.0), 1e-12);
}

TEST(SoftmaxCrossEntropyTest, ShiftInvariantAndGradientChecked) {
  Rng rng(5);
  Matrix logits = RandomMatrix(4, 6, rng, 2.0);
  std::vector<int> labels = {0, 3, 5, 2};
  const double base = SoftmaxCrossEntropy(logits, labels).value;
  Matrix shifted = logits.array() + 123.0;
  EXPECT_NEAR(SoftmaxCrossEntropy(shifted, labels).value, base, 1e-9);
  LossResult r = SoftmaxCrossEntropy(logits, labels);
  Matrix numeric = NumericGradient(
      [&] { return SoftmaxCrossEntropy(logits, labels).value; }, logits);
  EXPECT_LT(MaxRelativeError(r.grad, numeric), 1e-4);
  EXPECT_THROW(SoftmaxCrossEntropy(logits, {0, 1, 2, 6}), ContractViolation);
}

TEST(ReparameterizeTest, ZeroNoiseLimit) {
  Rng rng(8);
  Matrix h = RandomMatrix(3, 4, rng);
  Reparameterized r = Reparameterize(h, Matrix::Constant(3, 4, -80.0), rng);
  EXPECT_TRUE(r.sample.isApprox(h, 1e-12));
}

TEST(ReparameterizeTest, UnitNoiseIsShifted) {
  Reparameterized r = ReparameterizeWithNoise(Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                                              Matrix::Ones(1, 1));
  EXPECT_DOUBLE_EQ(r.sample(0, 0), 1.0);
}

TEST(ReparameterizeTest, MonteCarloMoments) {
  Rng rng(2026);
  const int n = 100000;
  Reparameterized r = Reparameterize(Matrix::Zero(n, 1), Matrix::Zero(n, 1), rng);
  const double mean = r.sample.mean();
  const double var = (r.sample.array() - mean).square().sum() / (n - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(ReparameterizeTest, GradientsFlowToMeanAndLogVariance) {
  Rng rng(9);
  Matrix h = RandomMatrix(3, 5, rng);
  Matrix lv = RandomMatrix(3, 5, rng, 0.5);
  Matrix eps = RandomMatrix(3, 5, rng);
  Matrix proj = RandomMatrix(3, 5, rng);
  auto loss = [&]() {
    return (ReparameterizeWithNoise(h, lv, eps).sample.array() * proj.array()).sum();
  };
  Reparameterized r = ReparameterizeWithNoise(h, lv, eps);
  Matrix grad_lv;
  Matrix grad_h = r.Backward(proj, lv, &grad_lv);
  EXPECT_LT(MaxRelativeError(grad_h, NumericGradient(loss, h)), 1e-4);
  EXPECT_LT(MaxRelativeError(grad_lv, NumericGradient(loss, lv)), 1e-4);
}

TEST(GumbelTest, DominantLogitWins) {
  Rng rng(10);
  Matrix logits = Matrix::Zero(1000, 5);
  logits.col(2).setConstant(20.0);
  GumbelSample s = StGumbelSoftmax(logits, 1.0, rng);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) hits += s.hard(i, 2) == 1.0;
  EXPECT_GE(hits, 999);
}

TEST(GumbelTest, OutputIsExactlyOneHot) {
  Rng rng(11);
  Matrix logits = RandomMatrix(500, 9, rng, 3.0);
  GumbelSample s = StGumbelSoftmax(logits, 0.7, rng);
  for (int i = 0; i < 500; ++i) {
    EXPECT_EQ(s.hard.row(i).sum(), 1.0);
    EXPECT_EQ((s.hard.row(i).array() != 0.0).count(), 1);
  }
  EXPECT_THROW(StGumbelSoftmax(logits, 0.0, rng), ContractViolation);
}

TEST(GumbelTest, FrequenciesMatchSoftmaxOracle) {
  Rng rng(12);
  const int n = 100000;
  const int k = 4;
  // Uniform logits.
  GumbelSample u = StGumbelSoftmax(Matrix::Zero(n, k), 1.0, rng);
  for (int c = 0; c < k; ++c) {
    const double freq = u.hard.col(c).sum() / n;
    EXPECT_NEAR(freq, 1.0 / k, 0.02 / k) << "class " << c;
  }
  // Non-uniform logits against softmax probabilities.
  Eigen::RowVectorXd row(k);
  row << 1.0, -0.5, 0.3, 2.0;
  Matrix logits = row.replicate(n, 1);
  GumbelSample s = StGumbelSoftmax(logits, 1.0, rng);
  Matrix oracle = SoftmaxRows(row);
  for (int c = 0; c < k; ++c) {
    EXPECT_NEAR(s.hard.col(c).sum() / n, oracle(0, c), 0.02);
  }
}

TEST(GumbelTest, StraightThroughUsesSoftJacobian) {
  Rng rng(13);
  Matrix logits = RandomMatrix(3, 6, rng);
  Matrix gumbel = RandomMatrix(3, 6, rng, 0.5);
  Matrix proj = RandomMatrix(3, 6, rng);
  const double temp = 0.8;
  auto soft_loss = [&]() {
    return (StGumbelSoftmaxWithNoise(logits, temp, gumbel).soft.array() *
            proj.array()).sum();
  };
  GumbelSample s = StGumbelSoftmaxWithNoise(logits, temp, gumbel);
  EXPECT_LT(MaxRelativeError(s.Backward(proj), NumericGradient(soft_loss, logits)),
            1e-4);
}

TEST(AdamTest, ZeroGradientLeavesParametersUnchanged) {
  Parameter p{"w", Matrix::Constant(2, 2, 3.0), Matrix::Zero(2, 2), true};
  Adam opt({&p}, {});
  for (int i = 0; i < 10; ++i) opt.Step();
  EXPECT_EQ(p.value, Matrix::Constant(2, 2, 3.0));
}

TEST(AdamTest, FirstStepMagnitudeIsLearningRate) {
  Parameter p{"w", Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.37), true};
  AdamConfig config;
  config.learning_rate = 0.01;
  Adam opt({&p}, config);
  opt.Step();
  EXPECT_NEAR(1.0 - p.value(0, 0), 0.01, 1e-6);
}

TEST(AdamTest, QuadraticBowlConverges) {
  Parameter p{"w", Matrix::Constant(1, 1, 5.0), Matrix::Zero(1, 1), true};
  AdamConfig config;
  config.learning_rate = 1e-2;
  Adam opt({&p}, config);
  double previous = 25.0;
  int reached = -1;
  for (int step = 1; step <= 2000; ++step) {
    p.grad(0, 0) = 2.0 * p.value(0, 0);
    opt.Step();
    const double loss = p.value(0, 0) * p.value(0, 0);
    if (step <= 400) {
      EXPECT_LT(loss, previous) << "step " << step;
    }
    previous = loss;
    if (reached < 0 && std::abs(p.value(0, 0)) < 0.01) reached = step;
  }
  EXPECT_GT(reached, 0);
  EXPECT_LT(std::abs(p.value(0, 0)), 0.01);
}

TEST(AdamTest, L2DecayShrinksWeightsOnly) {
  Parameter w{"w", Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1), true};
  Parameter b{"b", Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1), false};
  AdamConfig config;
  config.l2 = 0.5;
  Adam opt({&w, &b}, config);
  opt.Step();
  EXPECT_LT(w.value(0, 0), 2.0);
  EXPECT_EQ(b.value(0, 0), 2.0);
}

TEST(AdamTest, NanGradientNamesParameter) {
  Parameter p{"disc.l0.weight", Matrix::Zero(1, 1), Matrix::Constant(1, 1, NAN), true};
  Adam opt({&p}, {});
  try {
    opt.Step();
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("disc.l0.weight"), std::string::npos);
  }
}

TEST(AdamTest, SameSeedSameTrajectory) {
  auto train = [](std::uint64_t seed) {
    Rng rng(seed);
    DenseNet net("t", {4, 8, 2}, {Activation::kRelu, Activation::kIdentity}, rng);
    Adam opt(net.Parameters(), {});
    for (int i = 0; i < 50; ++i) {
      Matrix x = RandomMatrix(8, 4, rng);
      NetCache cache;
      net.ZeroGrad();
      Matrix y = net.Forward(x, &cache);
      net.Backward(cache, y);
      opt.Step();
    }
    return net;
  };
  EXPECT_TRUE(train(5) == train(5));
  EXPECT_FALSE(train(5) == train(6));
}

}  // namespace
}  // namespace seqreward::nn
