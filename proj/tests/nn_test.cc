// Copyright 2026 The physguide Authors
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

#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "physguide/nn.h"
#include "test_util.h"

namespace physguide {
namespace {

using Net = Mlp<double>;

// Loss = sum(out .* weights) so dL/dout = weights.
double WeightedOutput(const Net& net, const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& weights) {
  return (net.Forward(x).array() * weights.array()).sum();
}

void CheckGradient(Activation act, bool output_bias) {
  Net net({4, 3, 3, 2}, act, output_bias);
  net.InitRandom(11);
  for (auto& layer : net.layers()) {
    if (layer.b.size() > 0) layer.b.setRandom();
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(4, 3), w(2, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = n(rng);

  Net::Cache cache;
  net.Forward(x, &cache);
  auto grad = net.ZeroGradient();
  Eigen::MatrixXd grad_in;
  net.Backward(cache, w, &grad, &grad_in);

  const double eps = 1e-6;
  std::vector<double> flat = net.Flatten();
  std::vector<double> analytic;
  for (const auto& g : grad) {
    // Flatten order is row-major weights followed by biases.
    for (Eigen::Index r = 0; r < g.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.w.cols(); ++c) analytic.push_back(g.w(r, c));
    }
    analytic.insert(analytic.end(), g.b.data(), g.b.data() + g.b.size());
  }
  ASSERT_EQ(analytic.size(), flat.size());
  for (size_t i = 0; i < flat.size(); ++i) {
    Net plus = net, minus = net;
    std::vector<double> p = flat, m = flat;
    p[i] += eps;
    m[i] -= eps;
    plus.Unflatten(p);
    minus.Unflatten(m);
    const double numeric =
        (WeightedOutput(plus, x, w) - WeightedOutput(minus, x, w)) / (2 * eps);
    EXPECT_LT(testing::RelativeError(analytic[i], numeric), 1e-4) << "param " << i;
  }
  for (int i = 0; i < x.size(); ++i) {
    Eigen::MatrixXd xp = x, xm = x;
    xp.data()[i] += eps;
    xm.data()[i] -= eps;
    const double numeric =
        (WeightedOutput(net, xp, w) - WeightedOutput(net, xm, w)) / (2 * eps);
    EXPECT_LT(testing::RelativeError(grad_in.data()[i], numeric), 1e-4);
  }
}

TEST(MlpTest, GradientCheckTanh) { CheckGradient(Activation::kTanh, true); }
TEST(MlpTest, GradientCheckSilu) { CheckGradient(Activation::kSilu, false); }

TEST(MlpTest, FlattenRoundTripAndCast) {
  Net net({3, 5, 2}, Activation::kSilu, true);
  net.InitRandom(1);
  Net copy({3, 5, 2}, Activation::kSilu, true);
  copy.Unflatten(net.Flatten());
  EXPECT_EQ(copy.Flatten(), net.Flatten());
  EXPECT_EQ(net.NumParams(), 3u * 5 + 5 + 5 * 2 + 2);
  const Mlp<float> f = net.Cast<float>();
  EXPECT_EQ(f.NumParams(), net.NumParams());
  EXPECT_THROW(copy.Unflatten(std::vector<double>(3)), std::invalid_argument);
}

TEST(MlpTest, ZeroWeightsBiasFreeOutputIsZero) {
  Net net({4, 6, 3}, Activation::kTanh, false);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
  EXPECT_EQ(net.Forward(x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpTest, WrongInputDimensionThrows) {
  Net net({4, 2}, Activation::kTanh, true);
  EXPECT_THROW(net.Forward(Eigen::MatrixXd::Zero(3, 1)), std::invalid_argument);
}

TEST(OptimizerTest, ClipGradientNorm) {
  Net net({2, 2}, Activation::kTanh, true);
  auto g = net.ZeroGradient();
  g[0].w.setConstant(3.0);  // 4 entries -> norm 6
  g[0].b.setConstant(0.0);
  const double before = ClipGradientNorm(&g, 3.0);
  EXPECT_DOUBLE_EQ(before, 6.0);
  EXPECT_NEAR(g[0].w.norm(), 3.0, 1e-12);
  auto small = net.ZeroGradient();
  small[0].w.setConstant(0.1);
  ClipGradientNorm(&small, 3.0);
  EXPECT_DOUBLE_EQ(small[0].w(0, 0), 0.1);
}

template <typename Optimizer>
double FitLinear(Optimizer make) {
  // Learn y = 2x - 1 with a single linear layer.
  Net net({1, 1}, Activation::kTanh, true);
  auto opt = make(net);
  Eigen::MatrixXd x(1, 8), y(1, 8);
  for (int i = 0; i < 8; ++i) {
    x(0, i) = i / 4.0 - 1.0;
    y(0, i) = 2.0 * x(0, i) - 1.0;
  }
  double loss = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Net::Cache cache;
    const Eigen::MatrixXd out = net.Forward(x, &cache);
    loss = (out - y).squaredNorm() / 8;
    auto grad = net.ZeroGradient();
    net.Backward(cache, 2.0 * (out - y) / 8, &grad, nullptr);
    opt.Step(&net, grad);
  }
  return loss;
}

TEST(OptimizerTest, AdamAndMomentumConverge) {
  EXPECT_LT(FitLinear([](const Net& n) { return AdamOptimizer<double>(n, 0.01); }),
            1e-6);
  EXPECT_LT(FitLinear([](const Net& n) {
              return MomentumOptimizer<double>(n, 0.05, 0.9);
            }),
            1e-6);
}

TEST(BinaryIoTest, FloatRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "pg_nn_test.bin";
  const std::vector<float> v = {1.5f, -2.25f, 3.0e-8f, 0.0f};
  WriteFloatBinary(path, v);
  EXPECT_EQ(ReadFloatBinary(path), v);
  EXPECT_EQ(std::filesystem::file_size(path), v.size() * 4);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace physguide
