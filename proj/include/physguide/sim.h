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

#ifndef PHYSGUIDE_SIM_H_
#define PHYSGUIDE_SIM_H_

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "physguide/character.h"

namespace physguide {

struct SimConfig {
  double sim_hz = 60.0;
  double control_hz = 30.0;
  double gravity = 9.81;  // m/s^2, pointing down

  bool contacts_enabled = true;
  // Adds knee, ankle, pelvis and head contact sites so falls stay bounded.
  bool fall_contacts = true;
  // Stiffness multiplier of the fall sites; damping scales with its root.
  double fall_contact_scale = 10.0;
  double contact_stiffness = 2e5;  // k_n, N/m
  double contact_damping = 1e3;    // c_n, N s/m
  double friction = 0.9;           // mu_f
  double tangential_damping = 1e4;  // k_t, N s/m
  // A site engages when its height one substep ahead is negative if it is a
  // fall site or approaches the ground faster than this (m/s); otherwise
  // when it is below the ground. Stops fast impacts at the surface.
  double impact_speed = 0.5;

  // PD gains per internal joint (hips/knees 300/15, ankles 100/5).
  std::array<double, kNumJoints> kp = {300, 300, 100, 300, 300, 100};
  std::array<double, kNumJoints> kd = {15, 15, 5, 15, 15, 5};
  double torque_limit = 200.0;  // N m

  double residual_force_cap = 200.0;   // N per axis
  double residual_torque_cap = 100.0;  // N m

  double limit_stiffness = 2000.0;  // N m / rad
  double limit_damping = 20.0;      // N m s / rad

  double max_speed = 100.0;  // divergence threshold

  int substeps() const;
  double dt() const { return 1.0 / sim_hz; }
  // Throws std::invalid_argument.
  void Validate() const;
};

struct BodyState {
  Vec2 position = Vec2::Zero();  // center of mass
  double angle = 0.0;
  Vec2 velocity = Vec2::Zero();
  double angular_velocity = 0.0;
};

// Generalized coordinates are the pose vector (root x, z, theta, joints);
// `bodies` is derived from them and refreshed by every operation here.
struct SimState {
  PoseVector q{};
  PoseVector qd{};
  double time = 0.0;
  std::array<BodyState, kNumBodies> bodies;
};

struct Action {
  std::array<double, kNumJoints> targets{};  // PD targets, rad
  Vec2 residual_force = Vec2::Zero();        // on the root, N
  double residual_torque = 0.0;              // on the root, N m
};

struct ContactForce {
  int site = 0;
  Vec2 point = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  // Height the engagement test used: point.y(), or one substep ahead.
  double contact_height = 0.0;
  double normal = 0.0;      // N >= 0
  double tangential = 0.0;  // f_x, N
};

// Raised when a state leaves the finite/velocity envelope.
class SimDivergedError : public std::runtime_error {
 public:
  SimDivergedError(std::string quantity, double value);
  const std::string& quantity() const { return quantity_; }
  double value() const { return value_; }

 private:
  std::string quantity_;
  double value_;
};

// Builds a consistent state from generalized coordinates and velocities.
SimState MakeSimState(const Pose& pose, const PoseVector& qd,
                      const CharacterModel& character, double time = 0.0);

// Pose copied from `frame`, velocities by finite differences (zero for a
// single-frame motion). Throws std::out_of_range for a bad frame index.
SimState InitStateFromMotion(const Motion& motion, int frame);

// tau_j = kp * RotDiff(target_j, q_j) - kd * qd_j, clamped to the limit.
std::array<double, kNumJoints> PdTorques(
    const SimState& state, const std::array<double, kNumJoints>& targets,
    const SimConfig& config);

// Penalty forces at every contact site (feet first: heel_l, toe_l, heel_r,
// toe_r; then knees, ankles, pelvis, head when fall contacts are on).
std::vector<ContactForce> ContactForces(const SimState& state,
                                        const CharacterModel& character,
                                        const SimConfig& config);

// Clamps PD targets to the joint limits and residuals to their caps.
Action ClampAction(const Action& action, const CharacterModel& character,
                   const SimConfig& config);

// One integration substep of length config.dt().
SimState SimSubstep(const SimState& state, const Action& action,
                    const CharacterModel& character, const SimConfig& config);

// One control step (config.substeps() substeps). Deterministic. Throws
// SimDivergedError when a value is non-finite or a speed exceeds
// config.max_speed.
SimState SimStep(const SimState& state, const Action& action,
                 const CharacterModel& character, const SimConfig& config);

// Root pose and joint angles, angles wrapped to (-pi, pi].
Pose ExtractPose(const SimState& state);

// Total horizontal linear momentum of all bodies.
double HorizontalMomentum(const SimState& state,
                          const CharacterModel& character);

}  // namespace physguide

#endif  // PHYSGUIDE_SIM_H_
