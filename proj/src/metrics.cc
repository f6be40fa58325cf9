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

#include "physguide/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "physguide/motion_io.h"

namespace physguide {
namespace {

constexpr double kToleranceM = kContactToleranceMm * 1e-3;
constexpr int kFootContacts[2][2] = {{kHeelL, kToeL}, {kHeelR, kToeR}};

std::vector<Kinematics> AllKinematics(const Motion& motion) {
  std::vector<Kinematics> out;
  out.reserve(motion.frames.size());
  for (const Pose& p : motion.frames) {
    out.push_back(ForwardKinematics(p, motion.character));
  }
  return out;
}

void RequireTwoFrames(const Motion& motion) {
  if (motion.length() < 2) {
    throw std::invalid_argument("metric needs at least two frames");
  }
}

}  // namespace

PhysMetrics ComputePhysMetrics(const Motion& motion) {
  RequireTwoFrames(motion);
  const std::vector<Kinematics> kin = AllKinematics(motion);
  PhysMetrics m;
  for (const Kinematics& k : kin) {
    const double low_mm = k.LowestPoint() * 1000.0;
    if (low_mm < 0) m.penetrate += std::max(0.0, -low_mm - kContactToleranceMm);
    if (low_mm > 0) m.float_mm += std::max(0.0, low_mm - kContactToleranceMm);
  }
  m.penetrate /= kin.size();
  m.float_mm /= kin.size();

  double slip = 0.0;
  int pairs = 0;
  for (size_t h = 0; h + 1 < kin.size(); ++h) {
    for (int c = 0; c < kNumContactPoints; ++c) {
      const Vec2& a = kin[h].contacts[c];
      const Vec2& b = kin[h + 1].contacts[c];
      if (a.y() <= kToleranceM && b.y() <= kToleranceM) {
        slip += std::abs(b.x() - a.x()) * 1000.0;
        ++pairs;
      }
    }
  }
  m.skate = pairs > 0 ? slip / pairs : 0.0;
  m.phys_err = m.penetrate + m.float_mm + m.skate;
  return m;
}

Eigen::VectorXd MotionFeatures(const Motion& motion) {
  RequireTwoFrames(motion);
  const int frames = motion.length();
  Eigen::MatrixXd pose(kPoseDim, frames - 1);
  for (int h = 1; h < frames; ++h) {
    PoseVector v = motion.frames[h].ToVector();
    v[0] -= motion.frames[h - 1].x;
    pose.col(h - 1) = Eigen::Map<const Eigen::Matrix<double, kPoseDim, 1>>(v.data());
  }
  const std::vector<PoseVector> vel_rows = FiniteDiffVelocities(motion);
  Eigen::MatrixXd vel(kPoseDim, frames);
  for (int h = 0; h < frames; ++h) {
    vel.col(h) =
        Eigen::Map<const Eigen::Matrix<double, kPoseDim, 1>>(vel_rows[h].data());
  }
  auto stats = [](const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> mean,
                  Eigen::Ref<Eigen::VectorXd> sd) {
    mean = m.rowwise().mean();
    sd = ((m.colwise() - mean).array().square().rowwise().mean()).sqrt();
  };
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kMotionFeatureDim);
  stats(pose, f.segment(0, kPoseDim), f.segment(kPoseDim, kPoseDim));
  stats(vel, f.segment(2 * kPoseDim, kPoseDim), f.segment(3 * kPoseDim, kPoseDim));

  const std::vector<Kinematics> kin = AllKinematics(motion);
  for (int foot = 0; foot < 2; ++foot) {
    double height = 0.0;
    int contact = 0;
    for (const Kinematics& k : kin) {
      const double low = std::min(k.contacts[kFootContacts[foot][0]].y(),
                                  k.contacts[kFootContacts[foot][1]].y());
      height += low;
      if (low <= kToleranceM) ++contact;
    }
    f[4 * kPoseDim + foot] = height / frames;
    f[4 * kPoseDim + 2 + foot] = static_cast<double>(contact) / frames;
  }
  return f;
}

FeatureStats FeatureStats::Fit(const std::vector<Eigen::VectorXd>& features) {
  if (features.size() < 2) {
    throw std::invalid_argument("feature statistics need at least 2 samples");
  }
  const Eigen::Index dim = features[0].size();
  Eigen::MatrixXd x(dim, features.size());
  for (size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) {
      throw std::invalid_argument("feature dimensions differ");
    }
    x.col(i) = features[i];
  }
  FeatureStats s;
  s.count = static_cast<int>(features.size());
  s.mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - s.mean;
  s.cov = centered * centered.transpose() / (s.count - 1);
  return s;
}

double FidProxy(const FeatureStats& a, const FeatureStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw std::invalid_argument("feature statistics dimensions differ");
  }
  if (!a.mean.allFinite() || !b.mean.allFinite() || !a.cov.allFinite() ||
      !b.cov.allFinite()) {
    throw std::invalid_argument("feature statistics are not finite");
  }
  // Tr((Sa Sb)^1/2) = sum sqrt(eig(Sa^1/2 Sb Sa^1/2)).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(
      0.5 * (a.cov + a.cov.transpose()));
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a =
      ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  const Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(
      0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() +
                   b.cov.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

MotionClassifier::MotionClassifier() : MotionClassifier({64, 64}, 0) {}

MotionClassifier::MotionClassifier(const std::vector<int>& hidden,
                                   uint64_t seed) {
  std::vector<int> sizes = {kMotionFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kNumClasses);
  net_ = Mlp<double>(sizes, Activation::kTanh, true);
  net_.InitRandom(seed);
  mean_ = Eigen::VectorXd::Zero(kMotionFeatureDim);
  scale_ = Eigen::VectorXd::Ones(kMotionFeatureDim);
}

Eigen::MatrixXd MotionClassifier::Standardize(
    const std::vector<Motion>& motions) const {
  Eigen::MatrixXd x(kMotionFeatureDim, motions.size());
  for (size_t i = 0; i < motions.size(); ++i) x.col(i) = MotionFeatures(motions[i]);
  return (x.colwise() - mean_).array().colwise() / scale_.array();
}

void MotionClassifier::Train(const std::vector<Motion>& motions,
                             const std::vector<Condition>& labels,
                             const ClassifierTrainConfig& config) {
  if (motions.empty() || motions.size() != labels.size()) {
    throw std::invalid_argument("classifier needs one label per motion");
  }
  *this = MotionClassifier(config.hidden, config.seed);
  Eigen::MatrixXd raw(kMotionFeatureDim, motions.size());
  for (size_t i = 0; i < motions.size(); ++i) raw.col(i) = MotionFeatures(motions[i]);
  mean_ = raw.rowwise().mean();
  scale_ = ((raw.colwise() - mean_).array().square().rowwise().mean())
               .sqrt()
               .max(1e-6)
               .matrix();
  const Eigen::MatrixXd x = (raw.colwise() - mean_).array().colwise() / scale_.array();

  AdamOptimizer<double> adam(net_, config.learning_rate);
  std::mt19937_64 rng(config.seed + 1);
  std::vector<int> perm(motions.size());
  std::iota(perm.begin(), perm.end(), 0);
  const int n = static_cast<int>(motions.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int begin = 0; begin < n; begin += config.batch_size) {
      const int count = std::min(config.batch_size, n - begin);
      Eigen::MatrixXd xb(kMotionFeatureDim, count);
      std::vector<int> yb(count);
      for (int i = 0; i < count; ++i) {
        xb.col(i) = x.col(perm[begin + i]);
        yb[i] = static_cast<int>(labels[perm[begin + i]]);
      }
      Mlp<double>::Cache cache;
      const Eigen::MatrixXd logits = net_.Forward(xb, &cache);
      // Softmax cross-entropy gradient.
      Eigen::MatrixXd grad_out(kNumClasses, count);
      for (int i = 0; i < count; ++i) {
        const Eigen::VectorXd z = logits.col(i).array() - logits.col(i).maxCoeff();
        const Eigen::VectorXd p = z.array().exp() / z.array().exp().sum();
        grad_out.col(i) = p / count;
        grad_out(yb[i], i) -= 1.0 / count;
      }
      auto grad = net_.ZeroGradient();
      net_.Backward(cache, grad_out, &grad, nullptr);
      adam.Step(&net_, grad);
    }
  }
}

Condition MotionClassifier::Predict(const Motion& motion) const {
  return Predict(std::vector<Motion>{motion})[0];
}

std::vector<Condition> MotionClassifier::Predict(
    const std::vector<Motion>& motions) const {
  std::vector<Condition> out;
  if (motions.empty()) return out;
  const Eigen::MatrixXd logits = net_.Forward(Standardize(motions));
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    Eigen::Index best = 0;
    logits.col(i).maxCoeff(&best);
    out.push_back(static_cast<Condition>(best));
  }
  return out;
}

void MotionClassifier::Save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const std::vector<double> flat = net_.Flatten();
  WriteJsonFile(dir / "classifier.json",
                {{"format_version", 1},
                 {"kind", "classifier"},
                 {"layer_sizes", net_.sizes()},
                 {"activation", ActivationName(net_.activation())},
                 {"feature_mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
                 {"feature_scale", std::vector<double>(scale_.data(), scale_.data() + scale_.size())},
                 {"weights", flat}});
}

MotionClassifier MotionClassifier::Load(const std::filesystem::path& dir) {
  const nlohmann::json j = ReadJsonFile(dir / "classifier.json");
  MotionClassifier c;
  c.net_ = Mlp<double>(j.at("layer_sizes").get<std::vector<int>>(),
                       ParseActivation(j.at("activation").get<std::string>()),
                       true);
  c.net_.Unflatten(j.at("weights").get<std::vector<double>>());
  const auto mean = j.at("feature_mean").get<std::vector<double>>();
  const auto scale = j.at("feature_scale").get<std::vector<double>>();
  if (mean.size() != kMotionFeatureDim || scale.size() != kMotionFeatureDim) {
    throw std::runtime_error("classifier checkpoint has wrong feature size");
  }
  c.mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  c.scale_ = Eigen::Map<const Eigen::VectorXd>(scale.data(), scale.size());
  return c;
}

double EvalAccuracy(const MotionClassifier& classifier,
                    const std::vector<Motion>& motions,
                    const std::vector<Condition>& labels) {
  if (motions.empty()) throw std::invalid_argument("no motions to classify");
  if (motions.size() != labels.size()) {
    throw std::invalid_argument("one label per motion required");
  }
  const std::vector<Condition> pred = classifier.Predict(motions);
  int correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / pred.size();
}

}  // namespace physguide
