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

#ifndef PHYSGUIDE_METRICS_H_
#define PHYSGUIDE_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "physguide/character.h"
#include "physguide/nn.h"

namespace physguide {

inline constexpr double kContactToleranceMm = 5.0;
inline constexpr int kMotionFeatureDim = 40;

struct PhysMetrics {
  double penetrate = 0.0;  // mm
  double float_mm = 0.0;   // mm
  double skate = 0.0;      // mm
  double phys_err = 0.0;   // penetrate + float + skate
};

// Frame-averaged ground penetration and floating of the lowest point beyond
// a 5 mm tolerance, plus the mean horizontal slip of foot contact points
// that stay within 5 mm of the ground over a frame pair.
PhysMetrics ComputePhysMetrics(const Motion& motion);

// Means and standard deviations of the pose (root x as deltas) and its
// velocities, mean lowest height per foot and per-foot contact duty cycle.
Eigen::VectorXd MotionFeatures(const Motion& motion);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int count = 0;

  // Unbiased covariance; needs at least two samples.
  static FeatureStats Fit(const std::vector<Eigen::VectorXd>& features);
};

// Squared Frechet distance between two Gaussians.
double FidProxy(const FeatureStats& a, const FeatureStats& b);

struct ClassifierTrainConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
};

class MotionClassifier {
 public:
  MotionClassifier();
  MotionClassifier(const std::vector<int>& hidden, uint64_t seed);

  // Fits input standardization and trains with cross-entropy.
  void Train(const std::vector<Motion>& motions,
             const std::vector<Condition>& labels,
             const ClassifierTrainConfig& config);

  Condition Predict(const Motion& motion) const;
  std::vector<Condition> Predict(const std::vector<Motion>& motions) const;

  void Save(const std::filesystem::path& dir) const;
  static MotionClassifier Load(const std::filesystem::path& dir);

 private:
  Eigen::MatrixXd Standardize(const std::vector<Motion>& motions) const;

  Mlp<double> net_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

// Fraction of motions whose predicted label matches. Throws on empty input.
double EvalAccuracy(const MotionClassifier& classifier,
                    const std::vector<Motion>& motions,
                    const std::vector<Condition>& labels);

}  // namespace physguide

#endif  // PHYSGUIDE_METRICS_H_
