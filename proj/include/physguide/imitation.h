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

#ifndef PHYSGUIDE_IMITATION_H_
#define PHYSGUIDE_IMITATION_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "physguide/character.h"
#include "physguide/diffusion.h"
#include "physguide/nn.h"
#include "physguide/sim.h"

namespace physguide {

// Bodies whose global orientation enters the reward (the torso is rigidly
// attached to the pelvis and would duplicate it).
inline constexpr int kNumRewardBodies = 7;
// Bodies whose positions enter the observation (all but the root).
inline constexpr int kNumObsBodies = kNumBodies - 1;
inline constexpr int kObsDim = 5 + 2 * kNumJoints + 2 * kNumObsBodies +
                               (3 + kNumJoints + 2 * kNumObsBodies) + 1;
// Joint target offsets, residual force (x, z) and residual torque.
inline constexpr int kActionDim = kNumJoints + 3;
inline constexpr double kResidualForceScale = 100.0;   // N per unit action
inline constexpr double kResidualTorqueScale = 50.0;   // N m per unit action

struct RewardWeights {
  // Pose, velocity, joint position, body orientation.
  std::array<double, 4> w = {0.6, 0.1, 0.2, 0.1};
  std::array<double, 4> alpha = {60.0, 0.2, 100.0, 40.0};

  void Validate() const;
};

// Quantities compared by the imitation reward.
struct TrackingFeatures {
  std::array<double, kNumJoints> local{};      // joint angles
  PoseVector velocity{};                       // root and joint velocities
  std::array<Vec2, kNumJoints> joint_pos;      // world joint positions
  std::array<double, kNumRewardBodies> body_angle{};  // global orientations
};

TrackingFeatures ComputeTrackingFeatures(const Pose& pose,
                                         const PoseVector& velocity,
                                         const CharacterModel& character);

struct RewardTerms {
  double total = 0.0;
  double pose = 0.0;
  double velocity = 0.0;
  double joint = 0.0;
  double orientation = 0.0;
};

RewardTerms ImitationReward(const TrackingFeatures& sim,
                            const TrackingFeatures& ref,
                            const RewardWeights& weights);

// Heading-frame state (root x removed), the difference to the next target
// pose and the attribute psi.
Eigen::VectorXd BuildObservation(const SimState& state, const Pose& target,
                                 double psi, const CharacterModel& character);

// Converts a normalized action into simulator units around the target pose.
Action ToSimAction(const Eigen::VectorXd& action, const Pose& target);

// Running mean/variance of observations (parallel Welford merge).
struct RunningNorm {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double count = 0.0;
  double clip = 5.0;

  explicit RunningNorm(int dim = kObsDim);
  void Update(const Eigen::MatrixXd& batch);  // one sample per column
  Eigen::MatrixXd Normalize(const Eigen::MatrixXd& x) const;
};

// Sum over columns of log N(a; mu(obs), diag(std^2)). Accumulates the
// gradient of that sum into `grad` when non-null.
template <typename Scalar>
Scalar GaussianLogProb(const Mlp<Scalar>& net, const MatrixX<Scalar>& obs,
                       const MatrixX<Scalar>& actions,
                       const VectorX<Scalar>& std,
                       std::vector<DenseLayer<Scalar>>* grad) {
  typename Mlp<Scalar>::Cache cache;
  const MatrixX<Scalar> mu = net.Forward(obs, grad ? &cache : nullptr);
  const VectorX<Scalar> inv_var = std.array().square().inverse().matrix();
  const MatrixX<Scalar> diff = actions - mu;
  const Scalar log_norm =
      std.array().log().sum() +
      Scalar(0.5) * static_cast<Scalar>(std.size()) *
          static_cast<Scalar>(std::log(2.0 * std::numbers::pi));
  const Scalar quad =
      (diff.array().square().colwise() * inv_var.array()).sum();
  if (grad) {
    const MatrixX<Scalar> dmu = diff.array().colwise() * inv_var.array();
    net.Backward(cache, dmu, grad, nullptr);
  }
  return Scalar(-0.5) * quad - static_cast<Scalar>(obs.cols()) * log_norm;
}

class ImitationPolicy {
 public:
  ImitationPolicy();
  ImitationPolicy(const std::vector<int>& hidden, uint64_t seed);

  // Normalized action std: joint offsets 0.173 rad, residual 10 N / 5 N m.
  static std::array<double, kActionDim> DefaultActionStd();

  Eigen::VectorXd MeanAction(const Eigen::VectorXd& obs) const;
  Eigen::MatrixXd MeanActions(const Eigen::MatrixXd& obs) const;
  Eigen::VectorXd Values(const Eigen::MatrixXd& obs) const;

  void Save(const std::filesystem::path& dir,
            const nlohmann::json& extra = nlohmann::json::object()) const;
  static ImitationPolicy Load(const std::filesystem::path& dir);

  Mlp<float> actor;
  Mlp<float> critic;
  RunningNorm norm;
  std::array<double, kActionDim> action_std = DefaultActionStd();
  // The critic predicts returns divided by this factor.
  double value_scale = 1.0;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

GaeResult GaeAdvantages(const std::vector<double>& rewards,
                        const std::vector<double>& values, double bootstrap,
                        double gamma, double lambda);

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int mini_epochs = 6;
  int minibatch = 512;
  double grad_clip = 50.0;
  int num_envs = 64;
  int horizon = 32;
  int epochs = 500;
  std::vector<int> hidden = {256, 256};
  double termination_height = 0.3;  // m
  double termination_reward = 0.05;
  uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static PpoConfig FromJson(const nlohmann::json& j);
};

// PPO clipped surrogate of one sample, min(r A, clip(r, 1-eps, 1+eps) A).
double ClippedSurrogate(double ratio, double advantage, double eps);

struct EpochStats {
  int epoch = 0;
  double mean_reward = 0.0;
  std::array<double, 4> sub_rewards{};
  double mean_episode_length = 0.0;
};

struct PolicyTrainResult {
  ImitationPolicy policy;
  std::vector<EpochStats> history;
};

PolicyTrainResult TrainPolicy(
    const std::vector<Motion>& motions, const SimConfig& sim,
    const PpoConfig& ppo, const RewardWeights& weights,
    const std::function<void(const EpochStats&)>& on_epoch = nullptr);

// Simulator state for tracking `motion` from `frame`: the recorded pose with
// the root raised out of any penetration deeper than the static rest depth.
SimState InitTrackingState(const Motion& motion, int frame,
                           const SimConfig& sim);

struct ProjectionConfig {
  bool stochastic = false;
  uint64_t seed = 0;
  int max_divergences = 3;
};

ProjectionResult ProjectMotion(const ImitationPolicy& policy,
                               const Motion& motion, const SimConfig& sim,
                               const ProjectionConfig& config);

// Mean imitation reward of a mean-action rollout along `motion`.
RewardTerms EvaluateImitation(const ImitationPolicy& policy,
                              const Motion& motion, const SimConfig& sim,
                              const RewardWeights& weights);

class PolicyProjector : public MotionProjector {
 public:
  PolicyProjector(const ImitationPolicy& policy, SimConfig sim,
                  ProjectionConfig config = {})
      : policy_(policy), sim_(sim), config_(config) {}

  ProjectionResult Project(const Motion& motion) const override {
    return ProjectMotion(policy_, motion, sim_, config_);
  }

 private:
  const ImitationPolicy& policy_;
  SimConfig sim_;
  ProjectionConfig config_;
};

}  // namespace physguide

#endif  // PHYSGUIDE_IMITATION_H_
