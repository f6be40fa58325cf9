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

#include "physguide/datagen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace physguide {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFootLength = 0.20;

double Sample(const ParamRange& r, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

nlohmann::json RangeToJson(const ParamRange& r) { return {r.lo, r.hi}; }

// Hip, knee and ankle angles of one leg.
using LegAngles = std::array<double, 3>;

struct FrameAngles {
  double theta = 0.0;
  LegAngles left{};
  LegAngles right{};
};

// Thigh and knee angles placing the ankle at `ankle` relative to the hip,
// with the knee bending forward.
std::array<double, 2> LegIk(const Vec2& ankle, double thigh, double shin) {
  const double d = std::min(ankle.norm(), thigh + shin - 1e-9);
  const double cos_knee =
      (thigh * thigh + shin * shin - d * d) / (2.0 * thigh * shin);
  const double flex = std::numbers::pi - std::acos(std::clamp(cos_knee, -1.0, 1.0));
  const double cos_alpha = (thigh * thigh + d * d - shin * shin) / (2.0 * thigh * d);
  const double alpha = std::acos(std::clamp(cos_alpha, -1.0, 1.0));
  const double line = std::atan2(ankle.x(), -ankle.y());
  return {line + alpha, -flex};
}

// Feet stay flat (or, for hops, pitched about the toe by the heel raise):
// the ankle cancels the rest of the leg's rotation.
FrameAngles GaitAngles(const GaitParams& p, double t,
                       const CharacterModel& character) {
  const double ph = kTwoPi * p.frequency * t + p.phase;
  FrameAngles f;
  switch (p.kind) {
    case Condition::kStand: {
      f.theta = p.hip_amp * std::sin(ph);
      const double bend = p.knee_amp + p.bob_amp * 0.5 * (1.0 - std::cos(ph));
      const double hip = 0.5 * bend - f.theta;
      const double knee = -bend;
      f.left = f.right = {hip, knee, -(f.theta + hip + knee)};
      break;
    }
    case Condition::kWalk: {
      // Each leg swings for half a cycle. The stance foot moves back under
      // the hip at walking speed; the swing foot follows a smooth arc that
      // starts and ends at rest. Hip and knee come from two-link IK.
      const double thigh = character.bodies[kThighL].length;
      const double shin = character.bodies[kShinL].length;
      const double half = 0.5 * p.stride;
      const double reach = std::sqrt((thigh + shin) * (thigh + shin) - half * half);
      const double ankle_depth = 0.97 * reach;
      f.theta = p.hip_amp;
      auto leg = [&](double offset) -> LegAngles {
        double c = p.frequency * t + p.phase / kTwoPi + offset;
        c -= std::floor(c);
        Vec2 ankle;
        if (c < 0.5) {
          const double u = 2.0 * c;
          const double w = u - std::sin(kTwoPi * u) / kTwoPi;
          const double lift = std::sin(std::numbers::pi * u);
          ankle = Vec2(-half + 2.0 * p.stride * w - p.stride * u,
                       -ankle_depth + p.bob_amp * lift * lift);
        } else {
          const double u = 2.0 * c - 1.0;
          ankle = Vec2(half - p.stride * u, -ankle_depth);
        }
        const auto [world_thigh, knee] = LegIk(ankle, thigh, shin);
        const double hip = world_thigh - f.theta;
        return {hip, knee, -(f.theta + hip + knee)};
      };
      f.left = leg(0.0);
      f.right = leg(0.5);
      break;
    }
    case Condition::kHop: {
      const double s = 0.5 * (1.0 - std::cos(ph));
      const double knee = -p.knee_amp * s;
      const double hip = 0.5 * p.knee_amp * s;
      const double foot =
          -std::asin(std::min(1.0, p.bob_amp * s / kFootLength));
      f.left = f.right = {hip, knee, foot - (hip + knee)};
      break;
    }
    case Condition::kNull:
      throw std::invalid_argument("gait kind must be stand, walk or hop");
  }
  return f;
}

int LowestContact(const Kinematics& k) {
  int best = 0;
  for (int c = 1; c < kNumContactPoints; ++c) {
    if (k.contacts[c].y() < k.contacts[best].y()) best = c;
  }
  return best;
}

}  // namespace

void GaitParams::Validate() const {
  if (kind == Condition::kNull) {
    throw std::invalid_argument("gait kind must be stand, walk or hop");
  }
  if (!(frequency > 0.0)) throw std::invalid_argument("gait frequency must be > 0");
  if (hip_amp < 0 || knee_amp < 0 || bob_amp < 0 || stride < 0) {
    throw std::invalid_argument("gait amplitudes must be >= 0");
  }
  if (float_mm < 0 || penetration_mm < 0) {
    throw std::invalid_argument("artifact offsets must be >= 0");
  }
  if (kind == Condition::kWalk && !(stride > 0.0 && stride < 0.8)) {
    throw std::invalid_argument("walk stride must lie in (0, 0.8) m");
  }
  if (kind == Condition::kHop && bob_amp > kFootLength) {
    throw std::invalid_argument("heel raise exceeds foot length");
  }
}

nlohmann::json GaitParams::ToJson() const {
  return {{"kind", std::string(ConditionName(kind))},
          {"frequency", frequency},
          {"stride", stride},
          {"hip_amp", hip_amp},
          {"knee_amp", knee_amp},
          {"bob_amp", bob_amp},
          {"phase", phase},
          {"float_mm", float_mm},
          {"slide_mm", slide_mm},
          {"penetration_mm", penetration_mm}};
}

std::array<GaitRanges, kNumClasses> DefaultGaitRanges() {
  std::array<GaitRanges, kNumClasses> r;
  r[static_cast<int>(Condition::kStand)] = {
      {0.2, 0.6}, {0.0, 0.0}, {0.0, 0.08}, {0.0, 0.3}, {0.0, 0.1}};
  r[static_cast<int>(Condition::kWalk)] = {
      {0.7, 1.1}, {0.25, 0.45}, {0.0, 0.1}, {0.0, 0.0}, {0.04, 0.08}};
  r[static_cast<int>(Condition::kHop)] = {
      {1.2, 2.0}, {0.0, 0.0}, {0.0, 0.0}, {0.4, 0.8}, {0.03, 0.08}};
  return r;
}

void DatasetSpec::Validate() const {
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("every class count must be >= 1");
  }
  if (horizon < 2) throw std::invalid_argument("dataset horizon must be >= 2");
  if (!(fps > 0)) throw std::invalid_argument("dataset fps must be > 0");
  for (const GaitRanges& g : ranges) {
    for (const ParamRange* r :
         {&g.frequency, &g.stride, &g.hip_amp, &g.knee_amp, &g.bob_amp}) {
      if (r->lo > r->hi) throw std::invalid_argument("range has lo > hi");
    }
  }
}

nlohmann::json DatasetSpec::RangesToJson() const {
  nlohmann::json j = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const GaitRanges& g = ranges[c];
    j[std::string(ConditionName(static_cast<Condition>(c)))] = {
        {"frequency", RangeToJson(g.frequency)},
        {"stride", RangeToJson(g.stride)},
        {"hip_amp", RangeToJson(g.hip_amp)},
        {"knee_amp", RangeToJson(g.knee_amp)},
        {"bob_amp", RangeToJson(g.bob_amp)}};
  }
  return j;
}

GaitParams SampleGaitParams(Condition kind, const GaitRanges& ranges,
                            std::mt19937_64& rng) {
  GaitParams p;
  p.kind = kind;
  p.frequency = Sample(ranges.frequency, rng);
  p.stride = Sample(ranges.stride, rng);
  p.hip_amp = Sample(ranges.hip_amp, rng);
  p.knee_amp = Sample(ranges.knee_amp, rng);
  p.bob_amp = Sample(ranges.bob_amp, rng);
  p.phase = Sample({0.0, kTwoPi}, rng);
  return p;
}

Motion GenerateGait(const GaitParams& params, int horizon,
                    const CharacterModel& character, double fps) {
  params.Validate();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  Motion m;
  m.fps = fps;
  m.condition = params.kind;
  m.character = character;
  m.frames.resize(horizon);

  Kinematics prev;
  double x = 0.0;
  for (int h = 0; h < horizon; ++h) {
    const FrameAngles a = GaitAngles(params, h / fps, character);
    Pose pose;
    pose.theta = a.theta;
    for (int k = 0; k < 3; ++k) {
      pose.joints[kHipL + k] = a.left[k];
      pose.joints[kHipR + k] = a.right[k];
    }
    for (int j = 0; j < kNumJoints; ++j) {
      const JointSpec& lim = character.joints[j];
      if (pose.joints[j] < lim.lower || pose.joints[j] > lim.upper) {
        throw std::invalid_argument("gait drives joint '" + lim.name +
                                    "' outside its limits");
      }
    }
    // Kinematics relative to a root at the origin.
    const Kinematics k = ForwardKinematics(pose, character);
    if (h > 0) {
      const int anchor = LowestContact(k);
      x += prev.contacts[anchor].x() - k.contacts[anchor].x();
    }
    prev = k;
    pose.x = x + params.slide_mm * 1e-3 * h;
    pose.z = -k.LowestPoint() +
             (params.float_mm - params.penetration_mm) * 1e-3;
    m.frames[h] = pose;
  }
  return m;
}

uint64_t ItemSeed(uint64_t seed, uint64_t index) {
  // splitmix64 finalizer over the combined key.
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct PlannedItem {
  Condition label;
  uint64_t seed;
};

std::vector<PlannedItem> PlanItems(const DatasetSpec& spec) {
  std::vector<PlannedItem> items;
  uint64_t index = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    for (int i = 0; i < spec.counts[c]; ++i, ++index) {
      items.push_back({static_cast<Condition>(c), ItemSeed(spec.seed, index)});
    }
  }
  return items;
}

Motion GenerateItem(const DatasetSpec& spec, const PlannedItem& item) {
  const CharacterModel character = CharacterModel::Default();
  std::mt19937_64 rng(item.seed);
  const GaitParams p = SampleGaitParams(
      item.label, spec.ranges[static_cast<int>(item.label)], rng);
  return GenerateGait(p, spec.horizon, character, spec.fps);
}

}  // namespace

std::vector<Motion> GenerateMotions(const DatasetSpec& spec) {
  spec.Validate();
  std::vector<Motion> out;
  for (const PlannedItem& item : PlanItems(spec)) {
    out.push_back(GenerateItem(spec, item));
  }
  return out;
}

MotionDataset BuildDataset(const std::filesystem::path& dir,
                           const DatasetSpec& spec) {
  spec.Validate();
  std::filesystem::create_directories(dir);
  MotionDataset ds;
  ds.manifest.seed = spec.seed;
  ds.manifest.class_counts = spec.counts;
  ds.manifest.param_ranges = spec.RangesToJson();
  ds.manifest.param_ranges["horizon"] = spec.horizon;
  ds.manifest.param_ranges["fps"] = spec.fps;
  int index = 0;
  for (const PlannedItem& item : PlanItems(spec)) {
    char name[32];
    std::snprintf(name, sizeof(name), "motion_%05d.json", index++);
    Motion m = GenerateItem(spec, item);
    WriteMotion(dir / name, m);
    ds.manifest.entries.push_back({name, item.label, item.seed});
    ds.motions.push_back(std::move(m));
  }
  WriteManifest(dir, ds.manifest);
  return ds;
}

}  // namespace physguide
