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

#ifndef PHYSGUIDE_CHARACTER_H_
#define PHYSGUIDE_CHARACTER_H_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace physguide {

// Planar (sagittal) biped. World frame: x forward, z up, angles
// counter-clockwise in the x-z plane.
inline constexpr int kNumJoints = 6;
inline constexpr int kPoseDim = 3 + kNumJoints;
inline constexpr int kNumBodies = 8;
inline constexpr int kNumContactPoints = 4;
inline constexpr int kNumClasses = 3;

using Vec2 = Eigen::Vector2d;
using PoseVector = std::array<double, kPoseDim>;

enum BodyIndex : int {
  kPelvis = 0,
  kTorso,
  kThighL,
  kShinL,
  kFootL,
  kThighR,
  kShinR,
  kFootR,
};

// Internal joints, ordered per leg. Pose::joints uses the same order.
enum JointIndex : int {
  kHipL = 0,
  kKneeL,
  kAnkleL,
  kHipR,
  kKneeR,
  kAnkleR,
};

enum ContactIndex : int {
  kHeelL = 0,
  kToeL,
  kHeelR,
  kToeR,
};

enum class Condition : int {
  kStand = 0,
  kWalk = 1,
  kHop = 2,
  kNull = 3,  // unconditional token
};

std::string_view ConditionName(Condition c);
// Accepts "stand", "walk", "hop", "null". Throws std::invalid_argument.
Condition ParseCondition(std::string_view name);

struct BodySpec {
  std::string name;
  int parent = -1;  // -1 for the root body
  int joint = -1;   // internal joint driving this body; -1 when rigidly
                    // attached to the parent (or for the root)
  Vec2 origin = Vec2::Zero();  // body origin in the parent frame
  Vec2 tip = Vec2::Zero();     // distal endpoint in the body frame
  Vec2 com = Vec2::Zero();     // center of mass in the body frame
  double length = 0.0;         // m
  double mass = 0.0;           // kg
  double inertia = 0.0;        // kg m^2 about the center of mass
};

struct JointSpec {
  std::string name;
  double lower = 0.0;  // rad
  double upper = 0.0;  // rad
};

struct CharacterModel {
  // Default segments: pelvis 0.10 m / 1 kg, torso 0.60 m / 10 kg,
  // thigh 0.45 m / 5 kg, shin 0.45 m / 3 kg, foot 0.20 m / 1 kg. The
  // leg scale multiplies thigh and shin lengths and must lie in [0.8, 1.2].
  static CharacterModel Default(double leg_scale = 1.0);

  // Throws std::invalid_argument when an invariant does not hold.
  void Validate() const;

  double TotalMass() const;

  std::array<BodySpec, kNumBodies> bodies;
  std::array<JointSpec, kNumJoints> joints;
  // Heel/toe offsets of each foot, in the foot frame.
  std::array<Vec2, kNumContactPoints> contact_offsets;
  double leg_scale = 1.0;
};

bool operator==(const CharacterModel& a, const CharacterModel& b);

struct Pose {
  double x = 0.0;      // root position, m
  double z = 0.0;
  double theta = 0.0;  // root (pelvis) pitch, rad
  std::array<double, kNumJoints> joints{};

  PoseVector ToVector() const;
  static Pose FromVector(const PoseVector& v);

  bool operator==(const Pose&) const = default;
};

struct Motion {
  double fps = 30.0;
  std::vector<Pose> frames;
  Condition condition = Condition::kNull;
  CharacterModel character = CharacterModel::Default();

  int length() const { return static_cast<int>(frames.size()); }
  // Throws std::invalid_argument for empty, non-finite or unwrapped data.
  void Validate() const;
};

// World-frame kinematic quantities of a pose.
struct Kinematics {
  std::array<Vec2, kNumBodies> origin;  // proximal end of each body
  std::array<Vec2, kNumBodies> tip;     // distal end of each body
  std::array<Vec2, kNumBodies> com;
  std::array<double, kNumBodies> angle;
  std::array<Vec2, kNumJoints> joint_pos;
  std::array<Vec2, kNumContactPoints> contacts;

  // Lowest height over every body endpoint and foot contact point.
  double LowestPoint() const;
};

Kinematics ForwardKinematics(const Pose& pose, const CharacterModel& character);

// Wraps an angle into (-pi, pi].
double WrapAngle(double a);

// Relative rotation wrap(a - b) in (-pi, pi].
double RotDiff(double a, double b);

// Per-frame velocities (x, z, theta, joints) in field units per second.
// Forward differences scaled by fps; the last frame repeats the previous
// value. Angular fields use RotDiff. Throws std::invalid_argument if the
// motion has fewer than two frames.
std::vector<PoseVector> FiniteDiffVelocities(const Motion& motion);

}  // namespace physguide

#endif  // PHYSGUIDE_CHARACTER_H_
