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

#include "physguide/character.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace physguide {
namespace {

Vec2 Rotate(double angle, const Vec2& v) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

double RodInertia(double mass, double length) {
  return mass * length * length / 12.0;
}

bool IsWrapped(double a) {
  return a > -std::numbers::pi && a <= std::numbers::pi;
}

}  // namespace

std::string_view ConditionName(Condition c) {
  switch (c) {
    case Condition::kStand:
      return "stand";
    case Condition::kWalk:
      return "walk";
    case Condition::kHop:
      return "hop";
    case Condition::kNull:
      return "null";
  }
  return "null";
}

Condition ParseCondition(std::string_view name) {
  if (name == "stand") return Condition::kStand;
  if (name == "walk") return Condition::kWalk;
  if (name == "hop") return Condition::kHop;
  if (name == "null" || name == "none") return Condition::kNull;
  throw std::invalid_argument("unknown condition label: " + std::string(name));
}

CharacterModel CharacterModel::Default(double leg_scale) {
  CharacterModel m;
  m.leg_scale = leg_scale;
  const double leg = 0.45 * leg_scale;

  auto segment = [](std::string name, int parent, int joint, Vec2 origin,
                    Vec2 tip, Vec2 com, double length, double mass) {
    BodySpec b;
    b.name = std::move(name);
    b.parent = parent;
    b.joint = joint;
    b.origin = origin;
    b.tip = tip;
    b.com = com;
    b.length = length;
    b.mass = mass;
    b.inertia = RodInertia(mass, length);
    return b;
  };

  m.bodies[kPelvis] = segment("pelvis", -1, -1, Vec2(0, 0), Vec2(0, 0.10),
                              Vec2(0, 0.05), 0.10, 1.0);
  m.bodies[kTorso] = segment("torso", kPelvis, -1, Vec2(0, 0.10),
                             Vec2(0, 0.60), Vec2(0, 0.30), 0.60, 10.0);
  for (int side = 0; side < 2; ++side) {
    const std::string suffix = side == 0 ? "_l" : "_r";
    const int thigh = side == 0 ? kThighL : kThighR;
    const int hip = side == 0 ? kHipL : kHipR;
    m.bodies[thigh] =
        segment("thigh" + suffix, kPelvis, hip, Vec2(0, 0), Vec2(0, -leg),
                Vec2(0, -leg / 2), leg, 5.0);
    m.bodies[thigh + 1] =
        segment("shin" + suffix, thigh, hip + 1, Vec2(0, -leg), Vec2(0, -leg),
                Vec2(0, -leg / 2), leg, 3.0);
    BodySpec foot = segment("foot" + suffix, thigh + 1, hip + 2, Vec2(0, -leg),
                            Vec2(0.15, -0.20), Vec2(0.05, -0.17), 0.20, 1.0);
    foot.inertia = 1.0 * (0.20 * 0.20 + 0.20 * 0.20) / 12.0;
    m.bodies[thigh + 2] = foot;

    m.joints[hip] = {"hip" + suffix, -1.0, 1.6};
    m.joints[hip + 1] = {"knee" + suffix, -2.4, 0.05};
    m.joints[hip + 2] = {"ankle" + suffix, -0.8, 0.8};
  }
  m.contact_offsets[kHeelL] = Vec2(-0.05, -0.20);
  m.contact_offsets[kToeL] = Vec2(0.15, -0.20);
  m.contact_offsets[kHeelR] = Vec2(-0.05, -0.20);
  m.contact_offsets[kToeR] = Vec2(0.15, -0.20);
  return m;
}

void CharacterModel::Validate() const {
  for (const BodySpec& b : bodies) {
    if (!(b.length > 0.0) || !(b.mass > 0.0) || !(b.inertia > 0.0)) {
      throw std::invalid_argument("body '" + b.name +
                                  "' needs positive length, mass, inertia");
    }
  }
  for (const JointSpec& j : joints) {
    if (!(j.lower < j.upper)) {
      throw std::invalid_argument("joint '" + j.name + "' has lower >= upper");
    }
  }
  if (!(leg_scale >= 0.8 && leg_scale <= 1.2)) {
    throw std::invalid_argument("leg scale must lie in [0.8, 1.2]");
  }
}

double CharacterModel::TotalMass() const {
  double total = 0.0;
  for (const BodySpec& b : bodies) total += b.mass;
  return total;
}

bool operator==(const CharacterModel& a, const CharacterModel& b) {
  for (int i = 0; i < kNumBodies; ++i) {
    const BodySpec& x = a.bodies[i];
    const BodySpec& y = b.bodies[i];
    if (x.name != y.name || x.parent != y.parent || x.joint != y.joint ||
        x.origin != y.origin || x.tip != y.tip || x.com != y.com ||
        x.length != y.length || x.mass != y.mass || x.inertia != y.inertia) {
      return false;
    }
  }
  for (int i = 0; i < kNumJoints; ++i) {
    if (a.joints[i].name != b.joints[i].name ||
        a.joints[i].lower != b.joints[i].lower ||
        a.joints[i].upper != b.joints[i].upper) {
      return false;
    }
  }
  return a.contact_offsets == b.contact_offsets && a.leg_scale == b.leg_scale;
}

PoseVector Pose::ToVector() const {
  PoseVector v;
  v[0] = x;
  v[1] = z;
  v[2] = theta;
  for (int j = 0; j < kNumJoints; ++j) v[3 + j] = joints[j];
  return v;
}

Pose Pose::FromVector(const PoseVector& v) {
  Pose p;
  p.x = v[0];
  p.z = v[1];
  p.theta = v[2];
  for (int j = 0; j < kNumJoints; ++j) p.joints[j] = v[3 + j];
  return p;
}

void Motion::Validate() const {
  if (frames.empty()) throw std::invalid_argument("motion has no frames");
  if (!(fps > 0.0)) throw std::invalid_argument("motion fps must be positive");
  for (size_t h = 0; h < frames.size(); ++h) {
    const PoseVector v = frames[h].ToVector();
    for (int d = 0; d < kPoseDim; ++d) {
      if (!std::isfinite(v[d])) {
        throw std::invalid_argument("non-finite value at frame " +
                                    std::to_string(h));
      }
      if (d >= 2 && !IsWrapped(v[d])) {
        throw std::invalid_argument("angle outside (-pi, pi] at frame " +
                                    std::to_string(h));
      }
    }
  }
}

double Kinematics::LowestPoint() const {
  double lowest = origin[0].y();
  for (int b = 0; b < kNumBodies; ++b) {
    lowest = std::min({lowest, origin[b].y(), tip[b].y()});
  }
  for (const Vec2& c : contacts) lowest = std::min(lowest, c.y());
  return lowest;
}

Kinematics ForwardKinematics(const Pose& pose,
                             const CharacterModel& character) {
  Kinematics k;
  // Bodies are stored parent-first, so one pass suffices.
  for (int b = 0; b < kNumBodies; ++b) {
    const BodySpec& spec = character.bodies[b];
    if (spec.parent < 0) {
      k.angle[b] = pose.theta;
      k.origin[b] = Vec2(pose.x, pose.z);
    } else {
      const double parent_angle = k.angle[spec.parent];
      k.origin[b] = k.origin[spec.parent] + Rotate(parent_angle, spec.origin);
      k.angle[b] =
          parent_angle + (spec.joint >= 0 ? pose.joints[spec.joint] : 0.0);
    }
    k.tip[b] = k.origin[b] + Rotate(k.angle[b], spec.tip);
    k.com[b] = k.origin[b] + Rotate(k.angle[b], spec.com);
    if (spec.joint >= 0) k.joint_pos[spec.joint] = k.origin[b];
  }
  const int feet[kNumContactPoints] = {kFootL, kFootL, kFootR, kFootR};
  for (int c = 0; c < kNumContactPoints; ++c) {
    k.contacts[c] = k.origin[feet[c]] +
                    Rotate(k.angle[feet[c]], character.contact_offsets[c]);
  }
  return k;
}

double WrapAngle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

double RotDiff(double a, double b) { return WrapAngle(a - b); }

std::vector<PoseVector> FiniteDiffVelocities(const Motion& motion) {
  const int frames = motion.length();
  if (frames < 2) {
    throw std::invalid_argument(
        "finite differences need at least two frames");
  }
  std::vector<PoseVector> vel(frames);
  for (int h = 0; h + 1 < frames; ++h) {
    const PoseVector a = motion.frames[h].ToVector();
    const PoseVector b = motion.frames[h + 1].ToVector();
    for (int d = 0; d < kPoseDim; ++d) {
      const double delta = d < 2 ? b[d] - a[d] : RotDiff(b[d], a[d]);
      vel[h][d] = delta * motion.fps;
    }
  }
  vel[frames - 1] = vel[frames - 2];
  return vel;
}

}  // namespace physguide
