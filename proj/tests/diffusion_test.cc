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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "physguide/diffusion.h"
#include "test_util.h"

namespace physguide {
namespace {

constexpr int kToyFrames = 4;

// Features are the raw pose vectors of a fixed-length motion.
class ToyCodec : public DenoiserModel {
 public:
  int feature_dim() const override { return kToyFrames * kPoseDim; }
  Eigen::VectorXd Encode(const Motion& motion) const override {
    Eigen::VectorXd f(feature_dim());
    for (int h = 0; h < kToyFrames; ++h) {
      const PoseVector v = motion.frames[h].ToVector();
      for (int k = 0; k < kPoseDim; ++k) f(h * kPoseDim + k) = v[k];
    }
    return f;
  }
  Motion Decode(const Eigen::VectorXd& f, Condition c) const override {
    Motion m;
    m.condition = c;
    for (int h = 0; h < kToyFrames; ++h) {
      PoseVector v;
      for (int k = 0; k < kPoseDim; ++k) v[k] = f(h * kPoseDim + k);
      m.frames.push_back(Pose::FromVector(v));
    }
    return m;
  }
};

// Shrinks toward a condition-dependent offset; counts calls.
class ShrinkDenoiser : public ToyCodec {
 public:
  Eigen::MatrixXd Denoise(const Eigen::MatrixXd& x, double sigma,
                          const std::vector<Condition>& c) const override {
    ++calls;
    Eigen::MatrixXd out = x / (1.0 + sigma * sigma);
    for (int i = 0; i < out.cols(); ++i) {
      out.col(i).array() += 0.1 * static_cast<int>(c[i]);
    }
    return out;
  }
  mutable int calls = 0;
};

// Returns the clean point-mass sample regardless of the input.
class OracleDenoiser : public ToyCodec {
 public:
  explicit OracleDenoiser(Eigen::VectorXd target) : target_(std::move(target)) {}
  Eigen::MatrixXd Denoise(const Eigen::MatrixXd& x, double,
                          const std::vector<Condition>&) const override {
    return target_.replicate(1, x.cols());
  }

 private:
  Eigen::VectorXd target_;
};

// Lifts every frame by 1 cm; optionally fails.
class LiftProjector : public MotionProjector {
 public:
  ProjectionResult Project(const Motion& motion) const override {
    ProjectionResult r;
    r.motion = motion;
    for (Pose& p : r.motion.frames) p.z += 0.01;
    r.failed = fail;
    return r;
  }
  bool fail = false;
};

double MaxAbsDiff(const Motion& a, const Motion& b) {
  double d = 0.0;
  for (size_t h = 0; h < a.frames.size(); ++h) {
    const PoseVector va = a.frames[h].ToVector(), vb = b.frames[h].ToVector();
    for (int k = 0; k < kPoseDim; ++k) d = std::max(d, std::abs(va[k] - vb[k]));
  }
  return d;
}

SamplerConfig SmallConfig() {
  SamplerConfig c;
  c.T = 10;
  c.seed = 42;
  c.batch = 3;
  return c;
}

const std::vector<Condition> kConds = {Condition::kStand, Condition::kWalk,
                                       Condition::kNull};

TEST(ProjectionScheduleTest, SetsFromSchedulingStudy) {
  EXPECT_EQ(ProjectionSchedule::Parse("uniform:4").Resolve(50),
            (std::vector<int>{0, 15, 30, 45}));
  EXPECT_EQ(ProjectionSchedule::Parse("end:4:3").Resolve(50),
            (std::vector<int>{0, 3, 6, 9}));
  EXPECT_EQ(ProjectionSchedule::Parse("end:4:1").Resolve(50),
            (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(ProjectionSchedule::Parse("startend:2:3").Resolve(50),
            (std::vector<int>{0, 1, 2, 48, 49}));
  EXPECT_EQ(ProjectionSchedule::Parse("explicit:7,2,40").Resolve(50),
            (std::vector<int>{2, 7, 40}));
  EXPECT_TRUE(ProjectionSchedule::Parse("none").Resolve(50).empty());
  EXPECT_EQ(ProjectionSchedule::Parse("uniform:50").Resolve(50).size(), 50u);
}

TEST(ProjectionScheduleTest, Cardinalities) {
  for (int T : {10, 50, 100}) {
    for (int n = 1; n <= 10; ++n) {
      ProjectionSchedule u;
      u.kind = ProjectionSchedule::Kind::kUniform;
      u.n = n;
      EXPECT_EQ(u.Resolve(T).size(), static_cast<size_t>(n));
      for (int s = 1; s <= 5 && s * (n - 1) < T; ++s) {
        ProjectionSchedule e;
        e.kind = ProjectionSchedule::Kind::kEndSpace;
        e.n = n;
        e.s = s;
        const auto steps = e.Resolve(T);
        EXPECT_EQ(steps.size(), static_cast<size_t>(n));
        for (int t : steps) {
          EXPECT_GE(t, 0);
          EXPECT_LT(t, T);
        }
      }
      for (int m = 1; m + n <= T; m += 3) {
        ProjectionSchedule se;
        se.kind = ProjectionSchedule::Kind::kStartEnd;
        se.m = m;
        se.n = n;
        EXPECT_EQ(se.Resolve(T).size(), static_cast<size_t>(m + n));
      }
    }
  }
}

TEST(ProjectionScheduleTest, RejectsInvalidSpecs) {
  EXPECT_THROW(ProjectionSchedule::Parse("end:4:20").Resolve(50),
               std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("startend:30:30").Resolve(50),
               std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("explicit:3,3").Resolve(50),
               std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("explicit:50").Resolve(50),
               std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("uniform:0").Resolve(50),
               std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("bogus:1"), std::invalid_argument);
  EXPECT_THROW(ProjectionSchedule::Parse("end:4"), std::invalid_argument);
}

TEST(ProjectionScheduleTest, TextRoundTrip) {
  for (const char* text :
       {"none", "uniform:4", "startend:2:3", "end:4:1", "explicit:1,5,9"}) {
    EXPECT_EQ(ProjectionSchedule::Parse(text).ToString(), text);
  }
}

TEST(NoiseScheduleTest, GeometricExamples) {
  const NoiseSchedule two = BuildNoiseSchedule(2, 0.1, 1.0);
  ASSERT_EQ(two.sigma.size(), 3u);
  EXPECT_EQ(two.sigma[0], 0.0);
  EXPECT_NEAR(two.sigma[1], 0.1, 1e-15);
  EXPECT_NEAR(two.sigma[2], 1.0, 1e-15);
  const NoiseSchedule three = BuildNoiseSchedule(3, 0.1, 1.0);
  EXPECT_NEAR(three.sigma[2], std::sqrt(0.1), 1e-12);
  EXPECT_NEAR(three.sigma[2], 0.3162, 1e-4);
  const NoiseSchedule one = BuildNoiseSchedule(1, 0.1, 1.0);
  EXPECT_EQ(one.sigma, (std::vector<double>{0.0, 1.0}));
  const NoiseSchedule fifty = BuildNoiseSchedule(50, 0.02, 8.0);
  EXPECT_EQ(fifty.sigma[0], 0.0);
  for (int t = 1; t <= 50; ++t) EXPECT_GT(fifty.sigma[t], fifty.sigma[t - 1]);
  EXPECT_THROW(BuildNoiseSchedule(3, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(BuildNoiseSchedule(3, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(BuildNoiseSchedule(0, 0.1, 1.0), std::invalid_argument);
}

TEST(VarianceTest, Examples) {
  EXPECT_DOUBLE_EQ(VarianceV(0.0, 2.0, 1.0), 0.75);
  EXPECT_EQ(VarianceV(1.0, 2.0, 1.0), 0.0);
  EXPECT_EQ(VarianceV(0.3, 2.0, 0.0), 0.0);
  EXPECT_THROW(VarianceV(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(VarianceTest, BoundedBySigmaSSquared) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double eta = u(rng);
    const double t = 0.01 + 5.0 * u(rng);
    const double s = t * u(rng);
    const double v = VarianceV(eta, t, s);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, s * s);
  }
}

TEST(VarianceTest, AncestralMatchesGaussianPosterior) {
  // x_s = x0 + s e1, x_t = x_s + sqrt(t^2 - s^2) e2; Var(x_s | x_t, x0) is
  // the product-of-Gaussians variance.
  const double t = 1.7, s = 0.6;
  const double a = 1.0 / (s * s), b = 1.0 / (t * t - s * s);
  EXPECT_NEAR(VarianceV(0.0, t, s), 1.0 / (a + b), 1e-12);
}

TEST(DdimStepTest, ScalarExamples) {
  std::mt19937_64 rng(0);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xt(1), xd(1);
  xt << 2.0;
  xd << 0.0;
  EXPECT_DOUBLE_EQ(DdimStep(xd, xt, 2.0, 1.0, 1.0, &rng, &normal)(0), 1.0);
  // The final step returns the denoised estimate for any eta.
  Eigen::VectorXd x0 = Eigen::VectorXd::Random(5), x1 = Eigen::VectorXd::Random(5);
  EXPECT_EQ(DdimStep(x0, x1, 0.5, 0.0, 0.0, &rng, &normal), x0);
  EXPECT_EQ(DdimStep(x0, x0, 0.5, 0.2, 1.0, &rng, &normal), x0);
  EXPECT_THROW(DdimStep(x0, Eigen::VectorXd::Zero(4), 0.5, 0.2, 1.0, &rng, &normal),
               std::invalid_argument);
}

TEST(DdimStepTest, DeterministicUpdateDrawsNothing) {
  std::mt19937_64 rng(9), untouched(9);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xt = Eigen::VectorXd::Random(8), xd = Eigen::VectorXd::Random(8);
  DdimStep(xd, xt, 1.0, 0.5, 1.0, &rng, &normal);
  EXPECT_EQ(rng(), untouched());
}

TEST(DdimStepTest, StochasticMomentsMatch) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  const int n = 200000;
  Eigen::VectorXd xt = Eigen::VectorXd::Constant(n, 2.0);
  Eigen::VectorXd xd = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd xs = DdimStep(xd, xt, 2.0, 1.0, 0.0, &rng, &normal);
  // mean = sqrt(1 - 0.75)/2 * 2 = 0.5, variance 0.75.
  const double mean = xs.mean();
  const double var = (xs.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(var, 0.75, 0.01);
}

TEST(GuidanceTest, LinearCombination) {
  class Fixed : public ToyCodec {
   public:
    Eigen::MatrixXd Denoise(const Eigen::MatrixXd& x, double,
                            const std::vector<Condition>& c) const override {
      ++calls;
      Eigen::MatrixXd out(x.rows(), x.cols());
      for (int i = 0; i < x.cols(); ++i) {
        out.col(i).setConstant(c[i] == Condition::kNull ? 0.0 : 1.0);
      }
      return out;
    }
    mutable int calls = 0;
  } d;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(d.feature_dim(), 2);
  const Eigen::MatrixXd g =
      GuidedDenoise(d, x, 1.0, {Condition::kWalk, Condition::kNull}, 2.5);
  EXPECT_DOUBLE_EQ(g(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(g(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(GuidedDenoise(d, x, 1.0, {Condition::kHop, Condition::kHop}, 1.0)(3, 1), 1.0);
  EXPECT_DOUBLE_EQ(GuidedDenoise(d, x, 1.0, {Condition::kHop, Condition::kHop}, 0.0)(3, 1), 0.0);
  d.calls = 0;
  GuidedDenoise(d, x, 1.0, {Condition::kNull, Condition::kNull}, 2.5);
  EXPECT_EQ(d.calls, 1);
}

TEST(SamplerTest, EmptyScheduleEqualsStepwiseDdim) {
  ShrinkDenoiser d;
  SamplerConfig cfg = SmallConfig();
  cfg.eta = 0.0;
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  const auto sampled = SampleMotions(d, nullptr, {}, noise, kConds, cfg);

  // Independent loop built from the single-step pieces.
  for (int i = 0; i < 3; ++i) {
    std::mt19937_64 rng(cfg.seed + i);
    std::normal_distribution<double> normal;
    Eigen::VectorXd x(d.feature_dim());
    for (int k = 0; k < x.size(); ++k) x(k) = noise.sigma[cfg.T] * normal(rng);
    Eigen::VectorXd denoised;
    for (int t = cfg.T; t >= 1; --t) {
      denoised = GuidedDenoise(d, x, noise.sigma[t], {kConds[i]}, cfg.guidance_w);
      if (t > 1) {
        x = DdimStep(denoised, x, noise.sigma[t], noise.sigma[t - 1], cfg.eta,
                     &rng, &normal);
      }
    }
    EXPECT_EQ(sampled[i].frames, d.Decode(denoised, kConds[i]).frames);
  }
}

TEST(SamplerTest, ScheduleZeroIsOneStepPostProcessing) {
  ShrinkDenoiser d;
  LiftProjector p;
  const SamplerConfig cfg = SmallConfig();
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  const auto plain = SampleMotions(d, nullptr, {}, noise, kConds, cfg);
  const auto projected = SampleMotions(d, &p, {0}, noise, kConds, cfg);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(projected[i].frames, p.Project(plain[i]).motion.frames);
  }
}

TEST(SamplerTest, SameSeedSameOutput) {
  ShrinkDenoiser d;
  LiftProjector p;
  SamplerConfig cfg = SmallConfig();
  cfg.eta = 0.5;
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  const auto a = SampleMotions(d, &p, {0, 4}, noise, kConds, cfg);
  const auto b = SampleMotions(d, &p, {0, 4}, noise, kConds, cfg);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a[i].frames, b[i].frames);
  cfg.seed += 7;
  const auto c = SampleMotions(d, &p, {0, 4}, noise, kConds, cfg);
  EXPECT_GT(MaxAbsDiff(a[0], c[0]), 0.0);
}

TEST(SamplerTest, ProjectionChangesTrajectory) {
  ShrinkDenoiser d;
  LiftProjector p;
  const SamplerConfig cfg = SmallConfig();
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  const auto plain = SampleMotions(d, nullptr, {}, noise, kConds, cfg);
  const auto mid = SampleMotions(d, &p, {5}, noise, kConds, cfg);
  EXPECT_GT(MaxAbsDiff(plain[0], mid[0]), 1e-6);
}

TEST(SamplerTest, FailureCarriesStepAndChain) {
  ShrinkDenoiser d;
  LiftProjector p;
  p.fail = true;
  const SamplerConfig cfg = SmallConfig();
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  try {
    SampleMotions(d, &p, {2, 6}, noise, kConds, cfg);
    FAIL() << "expected ProjectionFailedError";
  } catch (const ProjectionFailedError& e) {
    EXPECT_EQ(e.step(), 6);  // visited first, since t runs downward
    EXPECT_EQ(e.chain(), 0);
  }
}

TEST(SamplerTest, RejectsBadInputs) {
  ShrinkDenoiser d;
  const SamplerConfig cfg = SmallConfig();
  const NoiseSchedule noise = BuildNoiseSchedule(cfg.T, 0.05, 3.0);
  EXPECT_THROW(SampleMotions(d, nullptr, {0}, noise, kConds, cfg),
               std::invalid_argument);
  LiftProjector p;
  EXPECT_THROW(SampleMotions(d, &p, {cfg.T}, noise, kConds, cfg),
               std::invalid_argument);
  SamplerConfig bad = cfg;
  bad.eta = 1.5;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

TEST(SamplerTest, PointMassOracleConverges) {
  Motion target = testing::ConstantMotion(kToyFrames, 0.0, 0.3);
  target.frames[2].joints[kKneeL] = -0.4;
  OracleDenoiser d(ShrinkDenoiser().Encode(target));
  for (double eta : {0.0, 0.5, 1.0}) {
    SamplerConfig cfg = SmallConfig();
    cfg.eta = eta;
    cfg.T = 50;
    const auto out = SampleMotions(d, nullptr, {}, BuildNoiseSchedule(50, 0.02, 8.0),
                                   kConds, cfg);
    for (const Motion& m : out) EXPECT_EQ(m.frames, target.frames);
  }
}

}  // namespace
}  // namespace physguide
