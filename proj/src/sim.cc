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

#include "physguide/sim.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace physguide {
namespace {

constexpr int kNumAngles = kPoseDim - 2;  // theta + joints

using Jacobian = Eigen::Matrix<double, 2, kPoseDim>;
using Vec9 = Eigen::Matrix<double, kPoseDim, 1>;
using Mat9 = Eigen::Matrix<double, kPoseDim, kPoseDim>;

Vec2 Perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

Vec2 Rotate(double angle, const Vec2& v) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

// Generalized coordinate that rotates `body` relative to its parent.
int CoordinateOf(const CharacterModel& character, int body) {
  if (character.bodies[body].parent < 0) return 2;
  const int joint = character.bodies[body].joint;
  return joint >= 0 ? 3 + joint : -1;
}

Vec9 ToEigen(const PoseVector& v) {
  return Eigen::Map<const Vec9>(v.data());
}

PoseVector FromEigen(const Vec9& v) {
  PoseVector out;
  Eigen::Map<Vec9>(out.data()) = v;
  return out;
}

struct ContactSite {
  int body;
  Vec2 local;
  double scale = 1.0;  // multiplies k_n; c_n is scaled by its square root
  // Always uses the one-substep-ahead engagement test.
  bool speculative = false;
};

std::vector<ContactSite> ContactSites(const CharacterModel& character,
                                      const SimConfig& config) {
  std::vector<ContactSite> sites = {
      {kFootL, character.contact_offsets[kHeelL]},
      {kFootL, character.contact_offsets[kToeL]},
      {kFootR, character.contact_offsets[kHeelR]},
      {kFootR, character.contact_offsets[kToeR]},
  };
  if (config.fall_contacts) {
    const double scale = config.fall_contact_scale;
    sites.push_back({kShinL, Vec2::Zero(), scale, true});
    sites.push_back({kShinR, Vec2::Zero(), scale, true});
    sites.push_back({kFootL, Vec2::Zero(), scale, true});
    sites.push_back({kFootR, Vec2::Zero(), scale, true});
    sites.push_back({kPelvis, Vec2::Zero(), scale, true});
    sites.push_back({kTorso, character.bodies[kTorso].tip, scale, true});
  }
  return sites;
}

// Height used by the engagement test of a site at height z moving with
// vertical velocity vz.
double ContactHeight(const ContactSite& site, double z, double vz,
                     const SimConfig& config) {
  if (site.speculative || vz < -config.impact_speed) {
    return z + config.dt() * vz;
  }
  return z;
}

// Positions, velocities and Jacobians of the articulated chain at (q, qd).
class ChainState {
 public:
  ChainState(const PoseVector& q, const PoseVector& qd,
             const CharacterModel& character)
      : character_(character), qd_(ToEigen(qd)) {
    kin_ = ForwardKinematics(Pose::FromVector(q), character);
    for (int b = 0; b < kNumBodies; ++b) {
      const int parent = character.bodies[b].parent;
      const int coord = CoordinateOf(character, b);
      omega_[b] = (parent >= 0 ? omega_[parent] : 0.0) +
                  (coord >= 0 ? qd_[coord] : 0.0);
      origin_vel_[b] = Jac(b, kin_.origin[b]) * qd_;
    }
  }

  const Kinematics& kin() const { return kin_; }
  double omega(int body) const { return omega_[body]; }

  Vec2 World(int body, const Vec2& local) const {
    return kin_.origin[body] + Rotate(kin_.angle[body], local);
  }

  // d(point)/d(q) in root coordinates for a point fixed to `body`.
  Jacobian Jac(int body, const Vec2& point) const {
    Jacobian j = Jacobian::Zero();
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    for (int a = body; a >= 0; a = character_.bodies[a].parent) {
      const int coord = CoordinateOf(character_, a);
      if (coord >= 0) j.col(coord) = Perp(point - kin_.origin[a]);
    }
    return j;
  }

  // Velocity-product term dJ/dt * qd of the same point.
  Vec2 Bias(int body, const Vec2& point_vel) const {
    Vec2 bias = Vec2::Zero();
    for (int a = body; a >= 0; a = character_.bodies[a].parent) {
      const int coord = CoordinateOf(character_, a);
      if (coord >= 0) bias += Perp(point_vel - origin_vel_[a]) * qd_[coord];
    }
    return bias;
  }

  // Rows of the angular velocity map over the angle coordinates.
  Eigen::Matrix<double, kNumAngles, 1> AngularRow(int body) const {
    Eigen::Matrix<double, kNumAngles, 1> row =
        Eigen::Matrix<double, kNumAngles, 1>::Zero();
    for (int a = body; a >= 0; a = character_.bodies[a].parent) {
      const int coord = CoordinateOf(character_, a);
      if (coord >= 0) row[coord - 2] = 1.0;
    }
    return row;
  }

  const Vec9& qd() const { return qd_; }

 private:
  const CharacterModel& character_;
  Vec9 qd_;
  Kinematics kin_;
  std::array<double, kNumBodies> omega_{};
  std::array<Vec2, kNumBodies> origin_vel_;
};

// Center-of-mass offset from the root and its Jacobian (root coordinates).
struct ComFrame {
  Vec2 offset = Vec2::Zero();
  Jacobian jac = Jacobian::Zero();
  Vec2 bias = Vec2::Zero();
};

ComFrame ComputeComFrame(const ChainState& chain,
                         const CharacterModel& character) {
  ComFrame f;
  const double total = character.TotalMass();
  for (int b = 0; b < kNumBodies; ++b) {
    const double w = character.bodies[b].mass / total;
    const Vec2& com = chain.kin().com[b];
    const Jacobian j = chain.Jac(b, com);
    f.offset += w * (com - chain.kin().origin[kPelvis]);
    f.jac += w * j;
    f.bias += w * chain.Bias(b, j * chain.qd());
  }
  return f;
}

void RefreshBodies(SimState* state, const CharacterModel& character) {
  const ChainState chain(state->q, state->qd, character);
  for (int b = 0; b < kNumBodies; ++b) {
    BodyState& body = state->bodies[b];
    body.position = chain.kin().com[b];
    body.angle = chain.kin().angle[b];
    body.velocity = chain.Jac(b, body.position) * chain.qd();
    body.angular_velocity = chain.omega(b);
  }
}

void CheckFinite(const SimState& state, double max_speed) {
  static const char* kNames[kPoseDim] = {"root_x", "root_z", "theta",
                                         "hip_l", "knee_l", "ankle_l",
                                         "hip_r", "knee_r", "ankle_r"};
  for (int d = 0; d < kPoseDim; ++d) {
    if (!std::isfinite(state.q[d])) {
      throw SimDivergedError(std::string(kNames[d]), state.q[d]);
    }
    if (!std::isfinite(state.qd[d]) || std::abs(state.qd[d]) > max_speed) {
      throw SimDivergedError(std::string(kNames[d]) + "_velocity",
                             state.qd[d]);
    }
  }
  for (int b = 0; b < kNumBodies; ++b) {
    const double speed = state.bodies[b].velocity.norm();
    if (!std::isfinite(speed) || speed > max_speed) {
      throw SimDivergedError("body_" + std::to_string(b) + "_speed", speed);
    }
  }
}

}  // namespace

SimDivergedError::SimDivergedError(std::string quantity, double value)
    : std::runtime_error("simulation diverged: " + quantity + " = " +
                         std::to_string(value)),
      quantity_(std::move(quantity)),
      value_(value) {}

int SimConfig::substeps() const {
  return static_cast<int>(std::lround(sim_hz / control_hz));
}

void SimConfig::Validate() const {
  if (!(sim_hz > 0.0) || !(control_hz > 0.0)) {
    throw std::invalid_argument("simulation and control rates must be > 0");
  }
  const double ratio = sim_hz / control_hz;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0) {
    throw std::invalid_argument(
        "sim rate must be an integer multiple of the control rate");
  }
  if (contact_stiffness < 0 || contact_damping < 0 || friction < 0 ||
      tangential_damping < 0 || torque_limit <= 0 || residual_force_cap < 0 ||
      residual_torque_cap < 0 || max_speed <= 0 || impact_speed < 0 ||
      !(fall_contact_scale > 0)) {
    throw std::invalid_argument("sim config has a negative coefficient");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (kp[j] < 0 || kd[j] < 0) {
      throw std::invalid_argument("PD gains must be nonnegative");
    }
  }
}

SimState MakeSimState(const Pose& pose, const PoseVector& qd,
                      const CharacterModel& character, double time) {
  SimState s;
  s.q = pose.ToVector();
  s.qd = qd;
  s.time = time;
  RefreshBodies(&s, character);
  return s;
}

SimState InitStateFromMotion(const Motion& motion, int frame) {
  if (frame < 0 || frame >= motion.length()) {
    throw std::out_of_range("frame " + std::to_string(frame) +
                            " outside motion of length " +
                            std::to_string(motion.length()));
  }
  PoseVector qd{};
  if (motion.length() >= 2) qd = FiniteDiffVelocities(motion)[frame];
  return MakeSimState(motion.frames[frame], qd, motion.character,
                      frame / motion.fps);
}

std::array<double, kNumJoints> PdTorques(
    const SimState& state, const std::array<double, kNumJoints>& targets,
    const SimConfig& config) {
  std::array<double, kNumJoints> tau{};
  for (int j = 0; j < kNumJoints; ++j) {
    const double raw = config.kp[j] * RotDiff(targets[j], state.q[3 + j]) -
                       config.kd[j] * state.qd[3 + j];
    tau[j] = std::clamp(raw, -config.torque_limit, config.torque_limit);
  }
  return tau;
}

std::vector<ContactForce> ContactForces(const SimState& state,
                                        const CharacterModel& character,
                                        const SimConfig& config) {
  const ChainState chain(state.q, state.qd, character);
  const std::vector<ContactSite> sites = ContactSites(character, config);
  std::vector<ContactForce> out;
  out.reserve(sites.size());
  for (size_t i = 0; i < sites.size(); ++i) {
    ContactForce f;
    f.site = static_cast<int>(i);
    f.point = chain.World(sites[i].body, sites[i].local);
    const Vec2 v = chain.Jac(sites[i].body, f.point) * chain.qd();
    const double height = ContactHeight(sites[i], f.point.y(), v.y(), config);
    f.velocity = v;
    f.contact_height = height;
    if (config.contacts_enabled && height < 0.0) {
      const double k = config.contact_stiffness * sites[i].scale;
      const double c = config.contact_damping * std::sqrt(sites[i].scale);
      f.normal = std::max(0.0, -k * height - c * v.y());
      const double cap = config.friction * f.normal;
      f.tangential = -std::clamp(config.tangential_damping * v.x(), -cap, cap);
    }
    out.push_back(f);
  }
  return out;
}

Action ClampAction(const Action& action, const CharacterModel& character,
                   const SimConfig& config) {
  Action a = action;
  for (int j = 0; j < kNumJoints; ++j) {
    a.targets[j] = std::clamp(a.targets[j], character.joints[j].lower,
                              character.joints[j].upper);
  }
  for (int i = 0; i < 2; ++i) {
    a.residual_force[i] =
        std::clamp(a.residual_force[i], -config.residual_force_cap,
                   config.residual_force_cap);
  }
  a.residual_torque = std::clamp(a.residual_torque, -config.residual_torque_cap,
                                 config.residual_torque_cap);
  return a;
}

// Linearly implicit Euler in (com_x, com_z, theta, joints) coordinates:
//   (M - h D - h^2 K) du = h (Q + h K u),  u += du,  g += h u
// where K and D are the position/velocity derivatives of the PD, joint
// limit and contact forces. With K = D = 0 this is symplectic Euler.
SimState SimSubstep(const SimState& state, const Action& action,
                    const CharacterModel& character, const SimConfig& config) {
  const double h = config.dt();
  const double total_mass = character.TotalMass();
  const ChainState chain(state.q, state.qd, character);
  const ComFrame com = ComputeComFrame(chain, character);
  const Vec2 root = chain.kin().origin[kPelvis];

  // Jacobian of a point with respect to the com-based coordinates.
  auto to_com_coords = [&](Jacobian j) {
    j.rightCols<kNumAngles>() -= com.jac.rightCols<kNumAngles>();
    return j;
  };

  const Vec9& qd = chain.qd();
  Vec9 u = qd;
  u.head<2>() += com.jac.rightCols<kNumAngles>() * qd.tail<kNumAngles>();

  Mat9 mass = Mat9::Zero();
  mass(0, 0) = total_mass;
  mass(1, 1) = total_mass;
  Vec9 force = Vec9::Zero();
  force(1) = -total_mass * config.gravity;
  Mat9 stiff = Mat9::Zero();
  Mat9 damp = Mat9::Zero();

  for (int b = 0; b < kNumBodies; ++b) {
    const BodySpec& spec = character.bodies[b];
    const Vec2& p = chain.kin().com[b];
    const Jacobian j_root = chain.Jac(b, p);
    const Jacobian j = to_com_coords(j_root);
    const auto ja = j.rightCols<kNumAngles>();
    const auto jw = chain.AngularRow(b);
    mass.bottomRightCorner<kNumAngles, kNumAngles>() +=
        spec.mass * ja.transpose() * ja + spec.inertia * jw * jw.transpose();
    const Vec2 bias = chain.Bias(b, j_root * qd) - com.bias;
    force.tail<kNumAngles>() -= spec.mass * ja.transpose() * bias;
  }

  for (int jnt = 0; jnt < kNumJoints; ++jnt) {
    const int d = 3 + jnt;
    const double raw = config.kp[jnt] * RotDiff(action.targets[jnt], state.q[d]) -
                       config.kd[jnt] * state.qd[d];
    if (std::abs(raw) <= config.torque_limit) {
      force(d) += raw;
      stiff(d, d) -= config.kp[jnt];
      damp(d, d) -= config.kd[jnt];
    } else {
      force(d) += std::copysign(config.torque_limit, raw);
    }
    const JointSpec& lim = character.joints[jnt];
    if (state.q[d] < lim.lower || state.q[d] > lim.upper) {
      const double bound = state.q[d] < lim.lower ? lim.lower : lim.upper;
      force(d) += config.limit_stiffness * (bound - state.q[d]) -
                  config.limit_damping * state.qd[d];
      stiff(d, d) -= config.limit_stiffness;
      damp(d, d) -= config.limit_damping;
    }
  }

  if (config.contacts_enabled) {
    for (const ContactSite& site : ContactSites(character, config)) {
      const Vec2 p = chain.World(site.body, site.local);
      const Jacobian j = to_com_coords(chain.Jac(site.body, p));
      const Vec2 v = j * u;
      // The implicit solve evaluates the spring at p + h v (through K u), so
      // the explicit part is -k p - c v for every site.
      const double height = ContactHeight(site, p.y(), v.y(), config);
      if (height >= 0.0) continue;
      const double k = config.contact_stiffness * site.scale;
      const double c = config.contact_damping * std::sqrt(site.scale);
      const double normal = -k * p.y() - c * v.y();
      const double predicted = -k * height - c * v.y();
      if (predicted <= 0.0) continue;
      const auto jz = j.row(1);
      const auto jx = j.row(0);
      force += jz.transpose() * normal;
      stiff -= k * jz.transpose() * jz;
      damp -= c * jz.transpose() * jz;
      const double cap = config.friction * predicted;
      const double viscous = config.tangential_damping * v.x();
      if (std::abs(viscous) <= cap) {
        force -= jx.transpose() * viscous;
        damp -= config.tangential_damping * jx.transpose() * jx;
      } else {
        // Sliding: the capped force acts as a damper of strength cap/|v|,
        // so the implicit solve can stop the slip but never reverse it.
        const double slide_damping = cap / std::abs(v.x());
        force -= jx.transpose() * std::copysign(cap, viscous);
        damp -= slide_damping * jx.transpose() * jx;
      }
    }
  }

  {
    const Jacobian j_root = to_com_coords(chain.Jac(kPelvis, root));
    force += j_root.transpose() * action.residual_force;
    force(2) += action.residual_torque;
  }

  const Mat9 lhs = mass - h * damp - h * h * stiff;
  const Vec9 rhs = h * (force + h * stiff * u);
  const Vec9 u_next = u + lhs.llt().solve(rhs);

  // Advance com position and angles, then recover the root.
  const Vec2 com_pos = root + com.offset;
  const Vec2 com_next = com_pos + h * u_next.head<2>();
  PoseVector q_next = state.q;
  for (int d = 2; d < kPoseDim; ++d) q_next[d] = state.q[d] + h * u_next(d);
  q_next[0] = 0.0;
  q_next[1] = 0.0;
  Vec9 qd_next = u_next;
  {
    const ChainState at_origin(q_next, FromEigen(u_next), character);
    const ComFrame next = ComputeComFrame(at_origin, character);
    q_next[0] = com_next.x() - next.offset.x();
    q_next[1] = com_next.y() - next.offset.y();
    qd_next.head<2>() -=
        next.jac.rightCols<kNumAngles>() * u_next.tail<kNumAngles>();
  }
  for (int d = 2; d < kPoseDim; ++d) q_next[d] = WrapAngle(q_next[d]);

  SimState out;
  out.q = q_next;
  out.qd = FromEigen(qd_next);
  out.time = state.time + h;
  RefreshBodies(&out, character);
  return out;
}

SimState SimStep(const SimState& state, const Action& action,
                 const CharacterModel& character, const SimConfig& config) {
  const Action clamped = ClampAction(action, character, config);
  SimState s = state;
  for (int i = 0; i < config.substeps(); ++i) {
    s = SimSubstep(s, clamped, character, config);
    CheckFinite(s, config.max_speed);
  }
  return s;
}

Pose ExtractPose(const SimState& state) {
  Pose p = Pose::FromVector(state.q);
  p.theta = WrapAngle(p.theta);
  for (double& j : p.joints) j = WrapAngle(j);
  return p;
}

double HorizontalMomentum(const SimState& state,
                          const CharacterModel& character) {
  double p = 0.0;
  for (int b = 0; b < kNumBodies; ++b) {
    p += character.bodies[b].mass * state.bodies[b].velocity.x();
  }
  return p;
}

}  // namespace physguide
