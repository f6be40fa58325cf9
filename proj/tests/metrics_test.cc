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

#include "physguide/datagen.h"
#include "physguide/metrics.h"
#include "test_util.h"

namespace physguide {
namespace {

using testing::ConstantMotion;

std::vector<Motion> Balanced(int per_class, uint64_t seed) {
  DatasetSpec spec;
  spec.counts = {per_class, per_class, per_class};
  spec.seed = seed;
  return GenerateMotions(spec);
}

std::vector<Condition> Labels(const std::vector<Motion>& motions) {
  std::vector<Condition> out;
  for (const Motion& m : motions) out.push_back(m.condition);
  return out;
}

TEST(PhysMetricsTest, GroundedStaticMotionIsClean) {
  const PhysMetrics m = ComputePhysMetrics(ConstantMotion(10));
  EXPECT_EQ(m.penetrate, 0.0);
  EXPECT_EQ(m.float_mm, 0.0);
  EXPECT_EQ(m.skate, 0.0);
  EXPECT_EQ(m.phys_err, 0.0);
}

TEST(PhysMetricsTest, PenetrationBeyondTolerance) {
  EXPECT_NEAR(ComputePhysMetrics(ConstantMotion(10, -0.012)).penetrate, 7.0, 1e-9);
  EXPECT_EQ(ComputePhysMetrics(ConstantMotion(10, -0.004)).penetrate, 0.0);
}

TEST(PhysMetricsTest, FloatBeyondTolerance) {
  const PhysMetrics m = ComputePhysMetrics(ConstantMotion(10, 0.020));
  EXPECT_NEAR(m.float_mm, 15.0, 1e-9);
  EXPECT_EQ(m.skate, 0.0);  // feet are above the contact band
  EXPECT_EQ(ComputePhysMetrics(ConstantMotion(10, 0.004)).float_mm, 0.0);
}

TEST(PhysMetricsTest, SkateOfSlidingContact) {
  Motion m = ConstantMotion(10);
  for (int h = 0; h < m.length(); ++h) m.frames[h].x = 0.003 * h;
  EXPECT_NEAR(ComputePhysMetrics(m).skate, 3.0, 1e-9);
}

TEST(PhysMetricsTest, SkateOnlyCountsContactFrames) {
  // Frames 0-4 grounded and sliding 2 mm per frame, frames 5-9 lifted 3 cm
  // and sliding faster: only grounded pairs contribute.
  Motion m = ConstantMotion(10);
  for (int h = 0; h < 10; ++h) {
    m.frames[h].x = h < 5 ? 0.002 * h : 0.05 * h;
    if (h >= 5) m.frames[h].z += 0.03;
  }
  EXPECT_NEAR(ComputePhysMetrics(m).skate, 2.0, 1e-9);
}

TEST(PhysMetricsTest, AdditivityAndTranslationInvariance) {
  for (const Motion& base : Balanced(3, 9)) {
    Motion m = base;
    for (size_t h = 0; h < m.frames.size(); ++h) {
      m.frames[h].z += 0.01 * std::sin(0.3 * h);
    }
    const PhysMetrics a = ComputePhysMetrics(m);
    EXPECT_EQ(a.phys_err, a.penetrate + a.float_mm + a.skate);
    EXPECT_GE(a.penetrate, 0.0);
    EXPECT_GE(a.float_mm, 0.0);
    EXPECT_GE(a.skate, 0.0);
    Motion shifted = m;
    for (Pose& p : shifted.frames) p.x += 1.25;
    const PhysMetrics b = ComputePhysMetrics(shifted);
    EXPECT_NEAR(b.penetrate, a.penetrate, 1e-9);
    EXPECT_NEAR(b.float_mm, a.float_mm, 1e-9);
    EXPECT_NEAR(b.skate, a.skate, 1e-6);
  }
}

TEST(PhysMetricsTest, FloatMonotoneInOffset) {
  double last = -1.0;
  for (double mm = 0.0; mm <= 40.0; mm += 2.5) {
    const double f = ComputePhysMetrics(ConstantMotion(5, mm / 1000.0)).float_mm;
    if (mm > 5.0) {
      EXPECT_GT(f, last);
    }
    last = f;
  }
}

TEST(PhysMetricsTest, RejectsSingleFrame) {
  EXPECT_THROW(ComputePhysMetrics(ConstantMotion(1)), std::invalid_argument);
  EXPECT_THROW(MotionFeatures(ConstantMotion(1)), std::invalid_argument);
}

FeatureStats MakeStats(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  FeatureStats s;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.count = 100;
  return s;
}

TEST(FidProxyTest, OneDimensionalClosedForm) {
  const FeatureStats a = MakeStats(Eigen::VectorXd::Constant(1, 0.0),
                                   Eigen::MatrixXd::Constant(1, 1, 1.0));
  const FeatureStats b = MakeStats(Eigen::VectorXd::Constant(1, 1.0),
                                   Eigen::MatrixXd::Constant(1, 1, 1.0));
  EXPECT_NEAR(FidProxy(a, b), 1.0, 1e-12);
  // (mu diff)^2 + (sigma diff)^2 with sigma 1 and 3.
  const FeatureStats c = MakeStats(Eigen::VectorXd::Constant(1, 2.0),
                                   Eigen::MatrixXd::Constant(1, 1, 9.0));
  EXPECT_NEAR(FidProxy(a, c), 4.0 + 4.0, 1e-12);
  EXPECT_NEAR(FidProxy(a, a), 0.0, 1e-12);
}

TEST(FidProxyTest, SymmetricNonNegativeAndShiftExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 6;
    Eigen::MatrixXd la(d, d), lb(d, d);
    Eigen::VectorXd ma(d), mb(d);
    for (int i = 0; i < d * d; ++i) {
      la.data()[i] = n(rng);
      lb.data()[i] = n(rng);
    }
    for (int i = 0; i < d; ++i) {
      ma(i) = n(rng);
      mb(i) = n(rng);
    }
    const FeatureStats a = MakeStats(ma, la * la.transpose());
    const FeatureStats b = MakeStats(mb, lb * lb.transpose());
    const double ab = FidProxy(a, b), ba = FidProxy(b, a);
    EXPECT_NEAR(ab, ba, 1e-8 * std::max(1.0, ab));
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(FidProxy(a, a), 0.0, 1e-8);
    const FeatureStats shifted = MakeStats(mb, a.cov);
    EXPECT_NEAR(FidProxy(a, shifted), (ma - mb).squaredNorm(), 1e-8);
  }
  EXPECT_THROW(FidProxy(MakeStats(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                        MakeStats(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3))),
               std::invalid_argument);
}

TEST(FeatureStatsTest, UnbiasedCovariance) {
  std::vector<Eigen::VectorXd> f = {Eigen::Vector2d(0, 1), Eigen::Vector2d(2, 1),
                                    Eigen::Vector2d(4, 4)};
  const FeatureStats s = FeatureStats::Fit(f);
  EXPECT_EQ(s.count, 3);
  EXPECT_NEAR(s.mean(0), 2.0, 1e-12);
  EXPECT_NEAR(s.mean(1), 2.0, 1e-12);
  EXPECT_NEAR(s.cov(0, 0), 4.0, 1e-12);  // (4 + 0 + 4) / 2
  EXPECT_NEAR(s.cov(1, 1), 3.0, 1e-12);  // (1 + 1 + 4) / 2
  EXPECT_NEAR(s.cov(0, 1), 3.0, 1e-12);  // (2 + 0 + 4) / 2
  EXPECT_EQ(s.cov(0, 1), s.cov(1, 0));
  EXPECT_THROW(FeatureStats::Fit({Eigen::Vector2d(0, 1)}), std::invalid_argument);
}

TEST(MotionFeaturesTest, FixedDimensionAndInvariances) {
  EXPECT_EQ(MotionFeatures(ConstantMotion(2)).size(), kMotionFeatureDim);
  EXPECT_EQ(MotionFeatures(ConstantMotion(97)).size(), kMotionFeatureDim);
  for (const Motion& m : Balanced(2, 1)) {
    Motion shifted = m;
    for (Pose& p : shifted.frames) p.x -= 3.5;
    const Eigen::VectorXd a = MotionFeatures(m), b = MotionFeatures(shifted);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_TRUE(a.allFinite());
  }
}

TEST(MotionFeaturesTest, ConstantMotionHasZeroVelocityFeatures) {
  const Eigen::VectorXd f = MotionFeatures(ConstantMotion(30));
  // Layout: pose mean, pose std, velocity mean, velocity std (9 each).
  EXPECT_EQ(f.segment(2 * kPoseDim, 2 * kPoseDim).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(f.segment(kPoseDim, kPoseDim).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClassifierTest, UntrainedIsNearChance) {
  const auto motions = Balanced(20, 2);
  const auto labels = Labels(motions);
  double mean = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    mean += EvalAccuracy(MotionClassifier({64, 64}, 100 + s), motions, labels) / seeds;
  }
  EXPECT_NEAR(mean, 1.0 / 3.0, 0.1);
}

TEST(ClassifierTest, SeparatesTrainingGaits) {
  const auto motions = Balanced(30, 2);
  const auto labels = Labels(motions);
  MotionClassifier clf;
  ClassifierTrainConfig cfg;
  cfg.epochs = 100;
  clf.Train(motions, labels, cfg);
  EXPECT_GE(EvalAccuracy(clf, motions, labels), 0.95);
  // Held-out gaits from another seed.
  const auto held = Balanced(20, 77);
  EXPECT_GE(EvalAccuracy(clf, held, Labels(held)), 0.9);

  const auto dir = std::filesystem::temp_directory_path() / "pg_classifier_test";
  std::filesystem::remove_all(dir);
  clf.Save(dir);
  const MotionClassifier loaded = MotionClassifier::Load(dir);
  EXPECT_EQ(loaded.Predict(held), clf.Predict(held));
  std::filesystem::remove_all(dir);

  const Motion& one = motions.front();
  EXPECT_EQ(EvalAccuracy(clf, {one}, {clf.Predict(one)}), 1.0);
  EXPECT_THROW(EvalAccuracy(clf, {}, {}), std::invalid_argument);
}

}  // namespace
}  // namespace physguide
