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

#include "physguide/imitation.h"

#include <algorithm>
#include <numeric>

#include "physguide/motion_io.h"

namespace physguide {
namespace {

constexpr int kRewardBodies[kNumRewardBodies] = {
    kPelvis, kThighL, kShinL, kFootL, kThighR, kShinR, kFootR};
constexpr double kMaxInitLinearSpeed = 10.0;   // m/s
constexpr double kMaxInitAngularSpeed = 10.0;  // rad/s
constexpr const char* kPolicyManifest = "policy.json";
constexpr const char* kPolicyWeights = "policy.bin";

MatrixX<float> ToFloat(const Eigen::MatrixXd& m) { return m.cast<float>(); }

double Sq(double x) { return x * x; }

Eigen::VectorXd ActionStdVector(const std::array<double, kActionDim>& s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), kActionDim);
}

// Per-frame velocities and reward features of one reference motion.
struct Reference {
  const Motion* motion;
  std::vector<TrackingFeatures> features;
};

Reference MakeReference(const Motion& motion) {
  Reference r{&motion, {}};
  const std::vector<PoseVector> vel = FiniteDiffVelocities(motion);
  for (int h = 0; h < motion.length(); ++h) {
    r.features.push_back(
        ComputeTrackingFeatures(motion.frames[h], vel[h], motion.character));
  }
  return r;
}

RewardTerms StepReward(const SimState& state, const Reference& ref, int frame,
                       const RewardWeights& weights) {
  const TrackingFeatures sim = ComputeTrackingFeatures(
      ExtractPose(state), state.qd, ref.motion->character);
  return ImitationReward(sim, ref.features[frame], weights);
}

}  // namespace

void RewardWeights::Validate() const {
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (w[i] < 0 || alpha[i] < 0) {
      throw std::invalid_argument("reward weights must be nonnegative");
    }
    sum += w[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("reward weights must sum to 1");
  }
}

TrackingFeatures ComputeTrackingFeatures(const Pose& pose,
                                         const PoseVector& velocity,
                                         const CharacterModel& character) {
  const Kinematics k = ForwardKinematics(pose, character);
  TrackingFeatures f;
  f.local = pose.joints;
  f.velocity = velocity;
  f.joint_pos = k.joint_pos;
  for (int i = 0; i < kNumRewardBodies; ++i) f.body_angle[i] = k.angle[kRewardBodies[i]];
  return f;
}

RewardTerms ImitationReward(const TrackingFeatures& sim,
                            const TrackingFeatures& ref,
                            const RewardWeights& weights) {
  double pose = 0.0, vel = 0.0, joint = 0.0, orient = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    pose += Sq(RotDiff(sim.local[j], ref.local[j]));
    joint += (sim.joint_pos[j] - ref.joint_pos[j]).squaredNorm();
  }
  for (int d = 0; d < kPoseDim; ++d) vel += Sq(sim.velocity[d] - ref.velocity[d]);
  for (int b = 0; b < kNumRewardBodies; ++b) {
    orient += Sq(RotDiff(sim.body_angle[b], ref.body_angle[b]));
  }
  RewardTerms r;
  r.pose = std::exp(-weights.alpha[0] * pose);
  r.velocity = std::exp(-weights.alpha[1] * vel);
  r.joint = std::exp(-weights.alpha[2] * joint);
  r.orientation = std::exp(-weights.alpha[3] * orient);
  r.total = weights.w[0] * r.pose + weights.w[1] * r.velocity +
            weights.w[2] * r.joint + weights.w[3] * r.orientation;
  return r;
}

Eigen::VectorXd BuildObservation(const SimState& state, const Pose& target,
                                 double psi, const CharacterModel& character) {
  const Pose pose = ExtractPose(state);
  const Kinematics cur = ForwardKinematics(pose, character);
  const Kinematics tgt = ForwardKinematics(target, character);
  const Vec2 root(pose.x, pose.z);
  Eigen::VectorXd o(kObsDim);
  int i = 0;
  o[i++] = pose.z;
  o[i++] = pose.theta;
  o[i++] = state.qd[0];
  o[i++] = state.qd[1];
  o[i++] = state.qd[2];
  for (int j = 0; j < kNumJoints; ++j) o[i++] = pose.joints[j];
  for (int j = 0; j < kNumJoints; ++j) o[i++] = state.qd[3 + j];
  for (int b = 1; b < kNumBodies; ++b) {
    const Vec2 rel = cur.com[b] - root;
    o[i++] = rel.x();
    o[i++] = rel.y();
  }
  o[i++] = target.x - pose.x;
  o[i++] = target.z - pose.z;
  o[i++] = RotDiff(target.theta, pose.theta);
  for (int j = 0; j < kNumJoints; ++j) {
    o[i++] = RotDiff(target.joints[j], pose.joints[j]);
  }
  for (int b = 1; b < kNumBodies; ++b) {
    const Vec2 d = tgt.com[b] - cur.com[b];
    o[i++] = d.x();
    o[i++] = d.y();
  }
  o[i++] = psi;
  return o;
}

Action ToSimAction(const Eigen::VectorXd& action, const Pose& target) {
  if (action.size() != kActionDim) {
    throw std::invalid_argument("action has wrong dimension");
  }
  Action a;
  for (int j = 0; j < kNumJoints; ++j) a.targets[j] = target.joints[j] + action[j];
  a.residual_force = Vec2(action[kNumJoints], action[kNumJoints + 1]) *
                     kResidualForceScale;
  a.residual_torque = action[kNumJoints + 2] * kResidualTorqueScale;
  return a;
}

RunningNorm::RunningNorm(int dim)
    : mean(Eigen::VectorXd::Zero(dim)), var(Eigen::VectorXd::Ones(dim)) {}

void RunningNorm::Update(const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) return;
  const double n = static_cast<double>(batch.cols());
  const Eigen::VectorXd bmean = batch.rowwise().mean();
  const Eigen::VectorXd bvar =
      (batch.colwise() - bmean).array().square().rowwise().mean();
  if (count == 0.0) {
    mean = bmean;
    var = bvar;
    count = n;
    return;
  }
  const double total = count + n;
  const Eigen::VectorXd delta = bmean - mean;
  mean += delta * (n / total);
  var = (var * count + bvar * n + delta.cwiseAbs2() * (count * n / total)) /
        total;
  count = total;
}

Eigen::MatrixXd RunningNorm::Normalize(const Eigen::MatrixXd& x) const {
  const Eigen::VectorXd inv = (var.array() + 1e-8).rsqrt();
  return ((x.colwise() - mean).array().colwise() * inv.array())
      .cwiseMax(-clip)
      .cwiseMin(clip)
      .matrix();
}

ImitationPolicy::ImitationPolicy() : ImitationPolicy({256, 256}, 0) {}

ImitationPolicy::ImitationPolicy(const std::vector<int>& hidden,
                                 uint64_t seed) {
  std::vector<int> sizes = {kObsDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  std::vector<int> value_sizes = sizes;
  sizes.push_back(kActionDim);
  value_sizes.push_back(1);
  actor = Mlp<float>(sizes, Activation::kTanh, true);
  critic = Mlp<float>(value_sizes, Activation::kTanh, true);
  // Near-zero initial mean: plain PD tracking of the reference.
  actor.InitRandom(seed, 0.01);
  critic.InitRandom(seed + 1);
}

std::array<double, kActionDim> ImitationPolicy::DefaultActionStd() {
  std::array<double, kActionDim> s;
  for (int j = 0; j < kNumJoints; ++j) s[j] = 0.173;
  s[kNumJoints] = 10.0 / kResidualForceScale;
  s[kNumJoints + 1] = 10.0 / kResidualForceScale;
  s[kNumJoints + 2] = 5.0 / kResidualTorqueScale;
  return s;
}

Eigen::VectorXd ImitationPolicy::MeanAction(const Eigen::VectorXd& obs) const {
  return MeanActions(obs).col(0);
}

Eigen::MatrixXd ImitationPolicy::MeanActions(const Eigen::MatrixXd& obs) const {
  return actor.Forward(ToFloat(norm.Normalize(obs))).cast<double>();
}

Eigen::VectorXd ImitationPolicy::Values(const Eigen::MatrixXd& obs) const {
  return critic.Forward(ToFloat(norm.Normalize(obs)))
             .row(0)
             .transpose()
             .cast<double>() *
         value_scale;
}

void ImitationPolicy::Save(const std::filesystem::path& dir,
                           const nlohmann::json& extra) const {
  std::filesystem::create_directories(dir);
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json j = {{"format_version", 1},
                      {"kind", "policy"},
                      {"obs_dim", kObsDim},
                      {"action_dim", kActionDim},
                      {"actor_sizes", actor.sizes()},
                      {"critic_sizes", critic.sizes()},
                      {"activation", ActivationName(actor.activation())},
                      {"action_std", action_std},
                      {"value_scale", value_scale},
                      {"obs_norm",
                       {{"mean", vec(norm.mean)},
                        {"var", vec(norm.var)},
                        {"count", norm.count},
                        {"clip", norm.clip}}},
                      {"weights", kPolicyWeights}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  WriteJsonFile(dir / kPolicyManifest, j);
  std::vector<float> flat = actor.Flatten();
  const std::vector<float> value_flat = critic.Flatten();
  flat.insert(flat.end(), value_flat.begin(), value_flat.end());
  WriteFloatBinary(dir / kPolicyWeights, flat);
}

ImitationPolicy ImitationPolicy::Load(const std::filesystem::path& dir) {
  const nlohmann::json j = ReadJsonFile(dir / kPolicyManifest);
  if (j.at("obs_dim").get<int>() != kObsDim ||
      j.at("action_dim").get<int>() != kActionDim) {
    throw std::runtime_error("policy checkpoint has incompatible dimensions");
  }
  ImitationPolicy p;
  const Activation act = ParseActivation(j.at("activation").get<std::string>());
  p.actor = Mlp<float>(j.at("actor_sizes").get<std::vector<int>>(), act, true);
  p.critic = Mlp<float>(j.at("critic_sizes").get<std::vector<int>>(), act, true);
  p.action_std = j.at("action_std").get<std::array<double, kActionDim>>();
  p.value_scale = j.at("value_scale").get<double>();
  const nlohmann::json& n = j.at("obs_norm");
  const auto mean = n.at("mean").get<std::vector<double>>();
  const auto var = n.at("var").get<std::vector<double>>();
  p.norm.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  p.norm.var = Eigen::Map<const Eigen::VectorXd>(var.data(), var.size());
  p.norm.count = n.at("count").get<double>();
  p.norm.clip = n.at("clip").get<double>();
  const std::vector<float> flat =
      ReadFloatBinary(dir / j.at("weights").get<std::string>());
  const size_t na = p.actor.NumParams();
  if (flat.size() != na + p.critic.NumParams()) {
    throw std::runtime_error("policy weight file has the wrong size");
  }
  p.actor.Unflatten(std::vector<float>(flat.begin(), flat.begin() + na));
  p.critic.Unflatten(std::vector<float>(flat.begin() + na, flat.end()));
  return p;
}

GaeResult GaeAdvantages(const std::vector<double>& rewards,
                        const std::vector<double>& values, double bootstrap,
                        double gamma, double lambda) {
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("rewards and values differ in length");
  }
  const size_t n = rewards.size();
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : bootstrap;
    const double delta = rewards[i] + gamma * next_value - values[i];
    next_adv = delta + gamma * lambda * next_adv;
    r.advantages[i] = next_adv;
    r.returns[i] = next_adv + values[i];
  }
  return r;
}

double ClippedSurrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void PpoConfig::Validate() const {
  if (!(gamma > 0 && gamma <= 1) || !(lambda > 0 && lambda <= 1)) {
    throw std::invalid_argument("ppo.gamma and ppo.lambda must lie in (0, 1]");
  }
  if (!(clip > 0)) throw std::invalid_argument("ppo.clip must be > 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("ppo.learning_rate must be > 0");
  if (mini_epochs < 1 || minibatch < 1 || num_envs < 1 || horizon < 1 ||
      epochs < 0) {
    throw std::invalid_argument("ppo counts must be positive");
  }
}

nlohmann::json PpoConfig::ToJson() const {
  return {{"gamma", gamma},
          {"lambda", lambda},
          {"clip", clip},
          {"learning_rate", learning_rate},
          {"mini_epochs", mini_epochs},
          {"minibatch", minibatch},
          {"grad_clip", grad_clip},
          {"num_envs", num_envs},
          {"horizon", horizon},
          {"epochs", epochs},
          {"hidden", hidden},
          {"termination_height", termination_height},
          {"termination_reward", termination_reward},
          {"seed", seed}};
}

PpoConfig PpoConfig::FromJson(const nlohmann::json& j) {
  PpoConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.clip = j.value("clip", c.clip);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.mini_epochs = j.value("mini_epochs", c.mini_epochs);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.num_envs = j.value("num_envs", c.num_envs);
  c.horizon = j.value("horizon", c.horizon);
  c.epochs = j.value("epochs", c.epochs);
  c.hidden = j.value("hidden", c.hidden);
  c.termination_height = j.value("termination_height", c.termination_height);
  c.termination_reward = j.value("termination_reward", c.termination_reward);
  c.seed = j.value("seed", c.seed);
  return c;
}

SimState InitTrackingState(const Motion& motion, int frame,
                           const SimConfig& sim) {
  SimState s = InitStateFromMotion(motion, frame);
  Pose pose = ExtractPose(s);
  PoseVector qd = s.qd;
  for (int d = 0; d < kPoseDim; ++d) {
    const double cap = d < 2 ? kMaxInitLinearSpeed : kMaxInitAngularSpeed;
    qd[d] = std::clamp(qd[d], -cap, cap);
  }
  if (sim.contacts_enabled && sim.contact_stiffness > 0) {
    const double rest = motion.character.TotalMass() * sim.gravity /
                        sim.contact_stiffness;
    const double low = ForwardKinematics(pose, motion.character).LowestPoint();
    if (low < -rest) pose.z += -rest - low;
  }
  return MakeSimState(pose, qd, motion.character, s.time);
}

PolicyTrainResult TrainPolicy(
    const std::vector<Motion>& motions, const SimConfig& sim,
    const PpoConfig& ppo, const RewardWeights& weights,
    const std::function<void(const EpochStats&)>& on_epoch) {
  ppo.Validate();
  sim.Validate();
  weights.Validate();
  if (motions.empty()) throw std::invalid_argument("policy needs motions");
  std::vector<Reference> refs;
  for (const Motion& m : motions) {
    if (m.length() < 2) throw std::invalid_argument("motions need >= 2 frames");
    refs.push_back(MakeReference(m));
  }

  PolicyTrainResult result;
  ImitationPolicy& policy = result.policy;
  policy = ImitationPolicy(ppo.hidden, ppo.seed);
  policy.value_scale = 1.0 / (1.0 - ppo.gamma * ppo.lambda);
  AdamOptimizer<float> actor_opt(policy.actor, ppo.learning_rate);
  AdamOptimizer<float> critic_opt(policy.critic, ppo.learning_rate);
  const Eigen::VectorXd action_std = ActionStdVector(policy.action_std);
  const VectorX<float> action_std_f = action_std.cast<float>();

  std::mt19937_64 rng(ppo.seed);
  std::normal_distribution<double> normal;

  struct Env {
    int motion = 0;
    int frame = 0;
    SimState state;
    int length = 0;
  };
  auto reset = [&](Env* e) {
    e->motion = std::uniform_int_distribution<int>(0, refs.size() - 1)(rng);
    const Motion& m = *refs[e->motion].motion;
    e->frame = std::uniform_int_distribution<int>(0, m.length() - 2)(rng);
    e->state = InitTrackingState(m, e->frame, sim);
    e->length = 0;
  };
  auto observe = [&](const Env& e) {
    const Motion& m = *refs[e.motion].motion;
    const int target = std::min(e.frame + 1, m.length() - 1);
    return BuildObservation(e.state, m.frames[target], m.character.leg_scale,
                            m.character);
  };

  const int envs = ppo.num_envs;
  const int steps = ppo.horizon;
  const int total = envs * steps;
  std::vector<Env> env(envs);

  for (int epoch = 0; epoch < ppo.epochs; ++epoch) {
    for (Env& e : env) reset(&e);
    Eigen::MatrixXd obs_raw(kObsDim, total);
    Eigen::MatrixXd obs_norm(kObsDim, total);
    Eigen::MatrixXd actions(kActionDim, total);
    std::vector<double> logp_old(total), values(total), rewards(total);
    // Per env: step indices of the current segment.
    std::vector<std::vector<int>> segment(envs);
    std::vector<double> advantages(total), returns(total);
    EpochStats stats;
    stats.epoch = epoch;
    int finished = 0;
    double finished_length = 0.0;

    auto close_segment = [&](int i, double bootstrap) {
      std::vector<double> r, v;
      for (int k : segment[i]) {
        r.push_back(rewards[k]);
        v.push_back(values[k]);
      }
      const GaeResult g = GaeAdvantages(r, v, bootstrap, ppo.gamma, ppo.lambda);
      for (size_t n = 0; n < segment[i].size(); ++n) {
        advantages[segment[i][n]] = g.advantages[n];
        returns[segment[i][n]] = g.returns[n];
      }
      segment[i].clear();
    };

    for (int t = 0; t < steps; ++t) {
      Eigen::MatrixXd obs(kObsDim, envs);
      for (int i = 0; i < envs; ++i) obs.col(i) = observe(env[i]);
      const Eigen::MatrixXd normed = policy.norm.Normalize(obs);
      const MatrixX<float> normed_f = ToFloat(normed);
      const Eigen::MatrixXd mean = policy.actor.Forward(normed_f).cast<double>();
      const Eigen::VectorXd value = policy.critic.Forward(normed_f)
                                        .row(0)
                                        .transpose()
                                        .cast<double>() *
                                    policy.value_scale;
      for (int i = 0; i < envs; ++i) {
        const int k = t * envs + i;
        Env& e = env[i];
        const Reference& ref = refs[e.motion];
        Eigen::VectorXd a(kActionDim);
        double logp = 0.0;
        for (int d = 0; d < kActionDim; ++d) {
          const double z = normal(rng);
          a[d] = mean(d, i) + action_std[d] * z;
          logp += -0.5 * z * z - std::log(action_std[d]) -
                  0.5 * std::log(2.0 * std::numbers::pi);
        }
        obs_raw.col(k) = obs.col(i);
        obs_norm.col(k) = normed.col(i);
        actions.col(k) = a;
        logp_old[k] = logp;
        values[k] = value[i];
        segment[i].push_back(k);

        const int target = e.frame + 1;
        bool terminated = false;
        RewardTerms r;
        try {
          e.state = SimStep(e.state, ToSimAction(a, ref.motion->frames[target]),
                            ref.motion->character, sim);
          r = StepReward(e.state, ref, target, weights);
          terminated = e.state.q[1] < ppo.termination_height ||
                       r.total < ppo.termination_reward;
        } catch (const SimDivergedError&) {
          terminated = true;
        }
        rewards[k] = r.total;
        stats.mean_reward += r.total;
        stats.sub_rewards[0] += r.pose;
        stats.sub_rewards[1] += r.velocity;
        stats.sub_rewards[2] += r.joint;
        stats.sub_rewards[3] += r.orientation;
        e.frame = target;
        ++e.length;
        const bool motion_end = e.frame + 1 >= ref.motion->length();
        if (terminated || motion_end) {
          double bootstrap = 0.0;
          if (!terminated) {
            bootstrap = policy.Values(observe(e))[0];
          }
          close_segment(i, bootstrap);
          ++finished;
          finished_length += e.length;
          reset(&e);
        }
      }
    }
    for (int i = 0; i < envs; ++i) {
      if (!segment[i].empty()) close_segment(i, policy.Values(observe(env[i]))[0]);
    }
    stats.mean_reward /= total;
    for (double& s : stats.sub_rewards) s /= total;
    stats.mean_episode_length = finished > 0 ? finished_length / finished : steps;

    // Advantage normalization over the batch.
    const double adv_mean =
        std::accumulate(advantages.begin(), advantages.end(), 0.0) / total;
    double adv_var = 0.0;
    for (double a : advantages) adv_var += Sq(a - adv_mean);
    const double adv_sd = std::sqrt(adv_var / total) + 1e-8;
    for (double& a : advantages) a = (a - adv_mean) / adv_sd;

    const MatrixX<float> obs_f = ToFloat(obs_norm);
    const MatrixX<float> act_f = ToFloat(actions);
    std::vector<int> perm(total);
    std::iota(perm.begin(), perm.end(), 0);
    for (int me = 0; me < ppo.mini_epochs; ++me) {
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int begin = 0; begin < total; begin += ppo.minibatch) {
        const int count = std::min(ppo.minibatch, total - begin);
        MatrixX<float> ob(kObsDim, count), ac(kActionDim, count);
        for (int n = 0; n < count; ++n) {
          ob.col(n) = obs_f.col(perm[begin + n]);
          ac.col(n) = act_f.col(perm[begin + n]);
        }
        // Actor: gradient of -mean clipped surrogate.
        Mlp<float>::Cache cache;
        const MatrixX<float> mu = policy.actor.Forward(ob, &cache);
        MatrixX<float> grad_mu(kActionDim, count);
        for (int n = 0; n < count; ++n) {
          const int k = perm[begin + n];
          double logp = 0.0;
          for (int d = 0; d < kActionDim; ++d) {
            const double z = (ac(d, n) - mu(d, n)) / action_std[d];
            logp += -0.5 * z * z - std::log(action_std[d]) -
                    0.5 * std::log(2.0 * std::numbers::pi);
          }
          const double ratio = std::exp(logp - logp_old[k]);
          const double adv = advantages[k];
          const bool clipped = (adv >= 0 && ratio > 1.0 + ppo.clip) ||
                               (adv < 0 && ratio < 1.0 - ppo.clip);
          const double dlogp = clipped ? 0.0 : -adv * ratio / count;
          for (int d = 0; d < kActionDim; ++d) {
            grad_mu(d, n) = static_cast<float>(
                dlogp * (ac(d, n) - mu(d, n)) / Sq(action_std[d]));
          }
        }
        auto actor_grad = policy.actor.ZeroGradient();
        policy.actor.Backward(cache, grad_mu, &actor_grad, nullptr);
        ClipGradientNorm(&actor_grad, ppo.grad_clip);
        actor_opt.Step(&policy.actor, actor_grad);

        // Critic: 0.5 * mean squared error to the scaled GAE returns.
        Mlp<float>::Cache vcache;
        const MatrixX<float> v = policy.critic.Forward(ob, &vcache);
        MatrixX<float> grad_v(1, count);
        for (int n = 0; n < count; ++n) {
          const double target = returns[perm[begin + n]] / policy.value_scale;
          grad_v(0, n) = static_cast<float>((v(0, n) - target) / count);
        }
        auto critic_grad = policy.critic.ZeroGradient();
        policy.critic.Backward(vcache, grad_v, &critic_grad, nullptr);
        ClipGradientNorm(&critic_grad, ppo.grad_clip);
        critic_opt.Step(&policy.critic, critic_grad);
      }
    }
    if (!policy.actor.AllFinite() || !policy.critic.AllFinite()) {
      throw std::runtime_error("policy weights became non-finite at epoch " +
                               std::to_string(epoch));
    }
    policy.norm.Update(obs_raw);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

ProjectionResult ProjectMotion(const ImitationPolicy& policy,
                               const Motion& motion, const SimConfig& sim,
                               const ProjectionConfig& config) {
  if (motion.length() < 2) {
    throw std::invalid_argument("projection needs at least two frames");
  }
  const CharacterModel& character = motion.character;
  const double psi = character.leg_scale;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;

  ProjectionResult result;
  result.motion.fps = motion.fps;
  result.motion.condition = motion.condition;
  result.motion.character = character;
  result.motion.frames.resize(motion.length());

  SimState state = InitTrackingState(motion, 0, sim);
  result.motion.frames[0] = ExtractPose(state);
  for (int h = 0; h + 1 < motion.length(); ++h) {
    const Pose& target = motion.frames[h + 1];
    Eigen::VectorXd a =
        policy.MeanAction(BuildObservation(state, target, psi, character));
    if (config.stochastic) {
      for (int d = 0; d < kActionDim; ++d) a[d] += policy.action_std[d] * normal(rng);
    }
    try {
      state = SimStep(state, ToSimAction(a, target), character, sim);
    } catch (const SimDivergedError&) {
      if (++result.divergences > config.max_divergences) {
        result.motion = motion;
        result.failed = true;
        return result;
      }
      state = InitTrackingState(motion, h + 1, sim);
    }
    result.motion.frames[h + 1] = ExtractPose(state);
  }
  return result;
}

RewardTerms EvaluateImitation(const ImitationPolicy& policy,
                              const Motion& motion, const SimConfig& sim,
                              const RewardWeights& weights) {
  const Reference ref = MakeReference(motion);
  SimState state = InitTrackingState(motion, 0, sim);
  RewardTerms mean;
  const int steps = motion.length() - 1;
  for (int h = 0; h < steps; ++h) {
    const Pose& target = motion.frames[h + 1];
    const Eigen::VectorXd a = policy.MeanAction(
        BuildObservation(state, target, motion.character.leg_scale,
                         motion.character));
    try {
      state = SimStep(state, ToSimAction(a, target), motion.character, sim);
    } catch (const SimDivergedError&) {
      break;  // remaining steps score zero
    }
    const RewardTerms r = StepReward(state, ref, h + 1, weights);
    mean.total += r.total / steps;
    mean.pose += r.pose / steps;
    mean.velocity += r.velocity / steps;
    mean.joint += r.joint / steps;
    mean.orientation += r.orientation / steps;
  }
  return mean;
}

}  // namespace physguide
